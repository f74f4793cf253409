mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tactile_loco::gait::FootContactState;
use tactile_loco::observation::ActionSpec;
use tactile_loco::reward::{
    check_termination, eval_rewards, ObjectState, RewardBreakdown, RewardConfig, RewardInputs, RewardTerm,
    RobotState, TerminationReason, VelocityCommand,
};

struct Case {
    robot: RobotState,
    object: ObjectState,
    contacts: FootContactState,
    command: VelocityCommand,
    action: [f64; 12],
    last_action: [f64; 12],
    gait: f64,
}

impl Case {
    fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Case {
            robot: common::random_robot(&mut rng),
            object: common::random_object(&mut rng),
            contacts: common::random_contacts(&mut rng),
            command: common::random_command(&mut rng),
            action: common::random_action(&mut rng),
            last_action: common::random_action(&mut rng),
            gait: 0.5,
        }
    }

    fn eval(&self, terminated: bool) -> RewardBreakdown {
        let inputs = RewardInputs {
            robot: &self.robot,
            object: &self.object,
            contacts: &self.contacts,
            gait: self.gait,
            command: &self.command,
            action: &self.action,
            last_action: &self.last_action,
            terminated,
        };
        eval_rewards(&inputs, &RewardConfig::default(), &ActionSpec::default())
    }
}

const PENALTIES: [RewardTerm; 18] = {
    use RewardTerm::*;
    [
        ObjXy, ObjYaw, Drag, Slip, ObjZvel, ObjRoll, ObjDanger, BaseHeight, BaseZvel, BaseRp, BaseRpvel, JointDev,
        JointLimits, JointVel, JointAcc, Torque, ActionRate, Collision,
    ]
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn penalties_non_negative_and_weights_negative(seed in any::<u64>()) {
        let b = Case::random(seed).eval(false);
        let w = RewardConfig::default().weights;
        for t in PENALTIES {
            prop_assert!(b.get(t) >= 0.0, "{} = {}", t.name(), b.get(t));
            prop_assert!(w.get(t) < 0.0);
        }
        for t in [RewardTerm::Alive, RewardTerm::TrackVxy, RewardTerm::TrackWz, RewardTerm::Gait] {
            prop_assert!(w.get(t) > 0.0);
        }
    }

    #[test]
    fn tracking_in_unit_interval(seed in any::<u64>()) {
        let case = Case::random(seed);
        let b = case.eval(false);
        let v = b.get(RewardTerm::TrackVxy);
        let w = b.get(RewardTerm::TrackWz);
        prop_assert!(v > 0.0 && v <= 1.0 && w > 0.0 && w <= 1.0);
        let exact_v = case.robot.v_r[0] == case.command.vx && case.robot.v_r[1] == case.command.vy;
        prop_assert_eq!(v == 1.0, exact_v);
    }

    #[test]
    fn evaluation_is_pure(seed in any::<u64>()) {
        let case = Case::random(seed);
        let a = case.eval(false);
        let b = case.eval(false);
        prop_assert_eq!(a.terms.map(f64::to_bits), b.terms.map(f64::to_bits));
        prop_assert_eq!(a.total.to_bits(), b.total.to_bits());
    }

    #[test]
    fn joint_limit_zero_iff_within(seed in any::<u64>(), inside in any::<bool>()) {
        let mut case = Case::random(seed);
        if inside {
            for j in 0..12 {
                case.robot.q[j] = case.robot.q[j].clamp(case.robot.q_min[j], case.robot.q_max[j]);
            }
        }
        let within = (0..12).all(|j| case.robot.q[j] >= case.robot.q_min[j] && case.robot.q[j] <= case.robot.q_max[j]);
        prop_assert_eq!(case.eval(false).get(RewardTerm::JointLimits) == 0.0, within);
    }
}

#[test]
fn drag_truth_table() {
    let cfg = RewardConfig::default();
    for low in [false, true] {
        for fast in [false, true] {
            let mut case = Case::random(1);
            for f in 0..4 {
                case.robot.foot_pos_w[f][2] = if low { cfg.h_z_th } else { cfg.h_z_th + 0.01 };
                let s = if fast { cfg.v_xy_th.sqrt() } else { 0.5 * cfg.v_xy_th.sqrt() };
                case.robot.foot_vel_w[f] = [s, 0.0, 0.0];
            }
            let want = if low && fast { 4.0 } else { 0.0 };
            assert_eq!(case.eval(false).get(RewardTerm::Drag), want, "low={low} fast={fast}");
        }
    }
}

#[test]
fn alive_drops_on_termination() {
    let case = Case::random(2);
    assert_eq!(case.eval(false).get(RewardTerm::Alive), 1.0);
    assert_eq!(case.eval(true).get(RewardTerm::Alive), 0.0);
}

#[test]
fn action_rate_uses_clipped_targets() {
    let mut case = Case::random(3);
    case.action = [0.0; 12];
    case.last_action = [0.0; 12];
    case.action[0] = 150.0;
    // 150 clips to 100, scaled by 0.25
    assert_eq!(case.eval(false).get(RewardTerm::ActionRate), 25.0);
}

#[test]
fn termination_reasons() {
    let cfg = RewardConfig::default();
    let robot = RobotState::standing(0.3);
    let mut obj = ObjectState::default();
    assert_eq!(check_termination(&robot, &obj, &cfg), None);
    obj.p_r[2] = -0.06;
    assert_eq!(check_termination(&robot, &obj, &cfg), Some(TerminationReason::ObjectFallen));
    obj.p_r[2] = 0.1;
    let mut down = robot.clone();
    down.body_ground_force = 3.0;
    assert_eq!(check_termination(&down, &obj, &cfg), Some(TerminationReason::BodyGroundContact));
}
