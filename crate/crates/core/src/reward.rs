//! Training reward terms and episode termination.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::gait::FootContactState;
use crate::observation::ActionSpec;

pub type Vec3 = [f64; 3];
pub type Joints = [f64; 12];

/// Robot state for one control tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    /// Torso position, world frame, m.
    pub p_w: Vec3,
    /// Torso linear velocity, robot frame, m/s.
    pub v_r: Vec3,
    /// Torso roll, pitch, yaw in world frame, rad.
    pub theta_w: Vec3,
    /// Torso angular velocity, robot frame, rad/s.
    pub w_r: Vec3,
    pub q: Joints,
    pub q_dot: Joints,
    pub q_ddot: Joints,
    pub tau: Joints,
    /// Per foot, FR FL RR RL.
    pub foot_pos_w: [Vec3; 4],
    pub foot_vel_w: [Vec3; 4],
    pub foot_force_w: [Vec3; 4],
    /// Thigh then calf contact force magnitude per leg, N.
    pub thigh_calf_force: [f64; 8],
    /// Ground contact force on torso or hips, N.
    pub body_ground_force: f64,
    pub q_default: Joints,
    pub q_min: Joints,
    pub q_max: Joints,
}

/// Nominal Go1 standing pose (hip, thigh, calf per leg).
pub const GO1_DEFAULT_JOINTS: Joints = [
    -0.1, 0.8, -1.5, 0.1, 0.8, -1.5, -0.1, 1.0, -1.5, 0.1, 1.0, -1.5,
];
pub const GO1_JOINT_MIN: Joints = [
    -0.863, -0.686, -2.818, -0.863, -0.686, -2.818, -0.863, -0.686, -2.818, -0.863, -0.686, -2.818,
];
pub const GO1_JOINT_MAX: Joints = [
    0.863, 4.501, -0.888, 0.863, 4.501, -0.888, 0.863, 4.501, -0.888, 0.863, 4.501, -0.888,
];

impl RobotState {
    /// Motionless robot standing at `height` on its default joint pose.
    pub fn standing(height: f64) -> Self {
        let foot_xy = [[0.19, -0.13], [0.19, 0.13], [-0.19, -0.13], [-0.19, 0.13]];
        RobotState {
            p_w: [0.0, 0.0, height],
            v_r: [0.0; 3],
            theta_w: [0.0; 3],
            w_r: [0.0; 3],
            q: GO1_DEFAULT_JOINTS,
            q_dot: [0.0; 12],
            q_ddot: [0.0; 12],
            tau: [0.0; 12],
            foot_pos_w: foot_xy.map(|[x, y]| [x, y, 0.02]),
            foot_vel_w: [[0.0; 3]; 4],
            foot_force_w: [[0.0, 0.0, 30.0]; 4],
            thigh_calf_force: [0.0; 8],
            body_ground_force: 0.0,
            q_default: GO1_DEFAULT_JOINTS,
            q_min: GO1_JOINT_MIN,
            q_max: GO1_JOINT_MAX,
        }
    }
}

/// Carried object state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectState {
    /// Position in robot frame, m.
    pub p_r: Vec3,
    pub v_r: Vec3,
    pub theta_r: Vec3,
    pub w_r: Vec3,
    /// Object xy in world frame, m.
    pub p_w_xy: [f64; 2],
}

/// Velocity command (vx, vy, wz).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub vx: f64,
    pub vy: f64,
    pub wz: f64,
}

impl VelocityCommand {
    pub fn new(vx: f64, vy: f64, wz: f64) -> Self {
        VelocityCommand { vx, vy, wz }
    }

    pub fn norm(&self) -> f64 {
        (self.vx * self.vx + self.vy * self.vy + self.wz * self.wz).sqrt()
    }

    pub fn as_array(&self) -> Vec3 {
        [self.vx, self.vy, self.wz]
    }
}

macro_rules! reward_terms {
    ($($variant:ident => $field:ident, $weight:expr;)*) => {
        /// One row of the training reward table.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum RewardTerm {
            $($variant,)*
        }

        impl RewardTerm {
            pub const ALL: [RewardTerm; reward_terms!(@count $($variant)*)] = [$(RewardTerm::$variant,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(RewardTerm::$variant => stringify!($field),)*
                }
            }
        }

        /// Per-term weights.
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(default)]
        pub struct RewardWeights {
            $(pub $field: f64,)*
        }

        impl Default for RewardWeights {
            fn default() -> Self {
                RewardWeights { $($field: $weight,)* }
            }
        }

        impl RewardWeights {
            pub fn get(&self, term: RewardTerm) -> f64 {
                match term {
                    $(RewardTerm::$variant => self.$field,)*
                }
            }
        }
    };
    (@count $($x:ident)*) => { 0usize $(+ reward_terms!(@one $x))* };
    (@one $x:ident) => { 1usize };
}

reward_terms! {
    Alive => alive, 10.0;
    TrackVxy => track_vxy, 1.0;
    TrackWz => track_wz, 0.5;
    ObjXy => obj_xy, -50.0;
    ObjYaw => obj_yaw, -0.1;
    Drag => drag, -1.0;
    Slip => slip, -0.1;
    Gait => gait, 0.5;
    ObjZvel => obj_zvel, -0.5;
    ObjRoll => obj_roll, -0.05;
    ObjDanger => obj_danger, -50.0;
    BaseHeight => base_height, -0.5;
    BaseZvel => base_zvel, -1.0;
    BaseRp => base_rp, -1.0;
    BaseRpvel => base_rpvel, -0.2;
    JointDev => joint_dev, -0.5;
    JointLimits => joint_limits, -10.0;
    JointVel => joint_vel, -5e-3;
    JointAcc => joint_acc, -5e-6;
    Torque => torque, -2.5e-4;
    ActionRate => action_rate, -0.75;
    Collision => collision, -5.0;
}

pub const TERM_COUNT: usize = RewardTerm::ALL.len();

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub weights: RewardWeights,
    pub sigma_vxy: f64,
    pub sigma_wz: f64,
    /// Foot height below which lateral motion counts as dragging, m.
    pub h_z_th: f64,
    /// Squared lateral foot speed threshold, (m/s)².
    pub v_xy_th: f64,
    /// Vertical foot force marking stance for slip, N.
    pub f_z_th: f64,
    /// Thigh/calf collision force threshold, N.
    pub f_th: f64,
    pub h_target: f64,
    /// Extra deviation penalty factor while standing.
    pub alpha_stance: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub z_max: f64,
    pub v_xy_max: f64,
    /// Base speed below which the robot counts as standing, m/s.
    pub v_th: f64,
    /// Object counts as fallen this far below the torso plane, m.
    pub fallen_offset: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            weights: RewardWeights::default(),
            sigma_vxy: 0.25,
            sigma_wz: 0.25,
            h_z_th: 0.03,
            v_xy_th: 0.25,
            f_z_th: 1.0,
            f_th: 0.1,
            h_target: 0.30,
            alpha_stance: 1.5,
            x_max: 0.15,
            y_max: 0.12,
            z_max: 0.20,
            v_xy_max: 1.0,
            v_th: 0.1,
            fallen_offset: 0.05,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        use RewardTerm::*;
        for term in RewardTerm::ALL {
            let w = self.weights.get(term);
            let positive = matches!(term, Alive | TrackVxy | TrackWz | Gait);
            if !w.is_finite() || (positive && w < 0.0) || (!positive && w > 0.0) {
                return Err(ConfigError::invalid(
                    "reward",
                    format!("weight '{}' = {w} has the wrong sign", term.name()),
                ));
            }
        }
        let positive = [
            self.sigma_vxy,
            self.sigma_wz,
            self.x_max,
            self.y_max,
            self.z_max,
            self.v_xy_max,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(ConfigError::invalid("reward", "kernels and danger bounds must be positive"));
        }
        Ok(())
    }
}

/// Unweighted term values plus their weighted sum.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardBreakdown {
    pub terms: [f64; TERM_COUNT],
    pub total: f64,
}

impl RewardBreakdown {
    pub fn get(&self, term: RewardTerm) -> f64 {
        self.terms[term as usize]
    }

    pub fn weighted(&self, term: RewardTerm, weights: &RewardWeights) -> f64 {
        weights.get(term) * self.get(term)
    }

    pub fn csv_header() -> Vec<&'static str> {
        RewardTerm::ALL.iter().map(|t| t.name()).chain(["total"]).collect()
    }
}

/// Everything the reward terms read for one tick.
#[derive(Debug, Clone, Copy)]
pub struct RewardInputs<'a> {
    pub robot: &'a RobotState,
    pub object: &'a ObjectState,
    pub contacts: &'a FootContactState,
    pub gait: f64,
    pub command: &'a VelocityCommand,
    pub action: &'a Joints,
    pub last_action: &'a Joints,
    pub terminated: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn hypot2(v: &[f64]) -> f64 {
    v[0].hypot(v[1])
}

/// True when the object leaves its safe box on the back or moves too fast.
pub fn object_in_danger(obj: &ObjectState, cfg: &RewardConfig) -> bool {
    obj.p_r[0].abs() > cfg.x_max
        || obj.p_r[1].abs() > cfg.y_max
        || obj.p_r[2].abs() > cfg.z_max
        || hypot2(&obj.v_r) > cfg.v_xy_max
}

/// Evaluates every reward term for one tick.
pub fn eval_rewards(inp: &RewardInputs<'_>, cfg: &RewardConfig, action_spec: &ActionSpec) -> RewardBreakdown {
    use RewardTerm::*;
    let r = inp.robot;
    let o = inp.object;
    let cmd = inp.command;
    let mut t = [0.0; TERM_COUNT];

    t[Alive as usize] = if inp.terminated { 0.0 } else { 1.0 };

    let dv = (r.v_r[0] - cmd.vx).hypot(r.v_r[1] - cmd.vy);
    t[TrackVxy as usize] = (-dv / cfg.sigma_vxy).exp();
    t[TrackWz as usize] = (-(r.w_r[2] - cmd.wz).abs() / cfg.sigma_wz).exp();
    t[ObjXy as usize] = (o.p_w_xy[0] - r.p_w[0]).hypot(o.p_w_xy[1] - r.p_w[1]);
    t[ObjYaw as usize] = o.theta_r[2].abs();

    let mut drag = 0.0;
    let mut slip = 0.0;
    for f in 0..4 {
        let v = &r.foot_vel_w[f];
        let speed_sq = v[0] * v[0] + v[1] * v[1];
        if r.foot_pos_w[f][2] <= cfg.h_z_th && speed_sq >= cfg.v_xy_th {
            drag += 1.0;
        }
        if r.foot_force_w[f][2] >= cfg.f_z_th {
            slip += speed_sq.sqrt();
        }
    }
    t[Drag as usize] = drag;
    t[Slip as usize] = slip;
    t[Gait as usize] = inp.gait;

    t[ObjZvel as usize] = o.v_r[2].abs();
    t[ObjRoll as usize] = o.theta_r[0].abs() + o.w_r[0].abs();
    t[ObjDanger as usize] = object_in_danger(o, cfg) as u8 as f64;

    t[BaseHeight as usize] = (r.p_w[2] - cfg.h_target).powi(2);
    t[BaseZvel as usize] = r.v_r[2].powi(2);
    t[BaseRp as usize] = r.theta_w[0].powi(2) + r.theta_w[1].powi(2);
    t[BaseRpvel as usize] = r.w_r[0].abs() + r.w_r[1].abs();

    let deviation: f64 = r
        .q
        .iter()
        .zip(&r.q_default)
        .map(|(q, d)| (q - d) * (q - d))
        .sum::<f64>()
        .sqrt();
    let base_speed = hypot2(&r.v_r);
    let commanded = cmd.norm() > 0.0;
    let moving = commanded || base_speed > cfg.v_th;
    let gate = if moving { 1.0 } else { cfg.alpha_stance };
    t[JointDev as usize] = deviation * gate;

    t[JointLimits as usize] = (0..12)
        .map(|j| (r.q_min[j] - r.q[j]).max(0.0) + (r.q[j] - r.q_max[j]).max(0.0))
        .sum();
    t[JointVel as usize] = norm(&r.q_dot);
    t[JointAcc as usize] = norm(&r.q_ddot);
    t[Torque as usize] = norm(&r.tau);

    // q_default cancels between the two targets
    t[ActionRate as usize] = (0..12)
        .map(|j| {
            let now = action_spec.alpha_action * inp.action[j].clamp(-action_spec.clip, action_spec.clip);
            let last = action_spec.alpha_action * inp.last_action[j].clamp(-action_spec.clip, action_spec.clip);
            (now - last).abs()
        })
        .sum();

    t[Collision as usize] = r.thigh_calf_force.iter().filter(|&&f| f > cfg.f_th).count() as f64;

    let total = RewardTerm::ALL
        .iter()
        .map(|&term| cfg.weights.get(term) * t[term as usize])
        .sum();
    RewardBreakdown { terms: t, total }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    ObjectFallen,
    BodyGroundContact,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::ObjectFallen => "object_fallen",
            TerminationReason::BodyGroundContact => "body_ground_contact",
        }
    }
}

/// Early termination: object dropped below the torso, or torso/hips on
/// the ground. Object loss takes precedence when both hold.
pub fn check_termination(robot: &RobotState, obj: &ObjectState, cfg: &RewardConfig) -> Option<TerminationReason> {
    if obj.p_r[2] < -cfg.fallen_offset {
        Some(TerminationReason::ObjectFallen)
    } else if robot.body_ground_force > 0.0 {
        Some(TerminationReason::BodyGroundContact)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    struct Tick {
        robot: RobotState,
        object: ObjectState,
        contacts: FootContactState,
        command: VelocityCommand,
        action: Joints,
        last_action: Joints,
    }

    impl Tick {
        fn nominal() -> Self {
            Tick {
                robot: RobotState::standing(0.30),
                object: ObjectState {
                    p_r: [0.0, 0.0, 0.08],
                    ..Default::default()
                },
                contacts: FootContactState::all_contact(),
                command: VelocityCommand::default(),
                action: [0.0; 12],
                last_action: [0.0; 12],
            }
        }

        fn eval(&self, gait: f64) -> RewardBreakdown {
            let inp = RewardInputs {
                robot: &self.robot,
                object: &self.object,
                contacts: &self.contacts,
                gait,
                command: &self.command,
                action: &self.action,
                last_action: &self.last_action,
                terminated: false,
            };
            eval_rewards(&inp, &RewardConfig::default(), &ActionSpec::default())
        }
    }

    #[test]
    fn weights_match_table() {
        let w = RewardWeights::default();
        let expected = [
            10.0, 1.0, 0.5, -50.0, -0.1, -1.0, -0.1, 0.5, -0.5, -0.05, -50.0, -0.5, -1.0, -1.0, -0.2, -0.5, -10.0,
            -5e-3, -5e-6, -2.5e-4, -0.75, -5.0,
        ];
        for (term, e) in RewardTerm::ALL.iter().zip(expected) {
            assert_eq!(w.get(*term), e, "{}", term.name());
        }
        RewardConfig::default().validate().unwrap();
    }

    #[test]
    fn nominal_standing_has_no_penalties() {
        let b = Tick::nominal().eval(0.8);
        assert_eq!(b.get(RewardTerm::TrackVxy), 1.0);
        assert_eq!(b.get(RewardTerm::TrackWz), 1.0);
        for term in RewardTerm::ALL {
            let w = RewardWeights::default().get(term);
            if w < 0.0 {
                assert_eq!(b.get(term), 0.0, "{}", term.name());
            }
        }
        assert_relative_eq!(b.total, 10.0 + 1.0 + 0.5 + 0.5 * 0.8, epsilon = 1e-12);
    }

    #[test]
    fn object_offset_term() {
        let mut t = Tick::nominal();
        t.object.p_w_xy = [0.1, 0.0];
        let b = t.eval(0.0);
        assert_relative_eq!(b.get(RewardTerm::ObjXy), 0.1);
        assert_relative_eq!(b.weighted(RewardTerm::ObjXy, &RewardWeights::default()), -5.0);
    }

    #[test]
    fn drag_truth_table() {
        for (low, fast) in [(false, false), (false, true), (true, false), (true, true)] {
            let mut t = Tick::nominal();
            t.robot.foot_pos_w[0][2] = if low { 0.01 } else { 0.08 };
            t.robot.foot_vel_w[0] = if fast { [0.6, 0.0, 0.0] } else { [0.1, 0.0, 0.0] };
            let b = t.eval(0.0);
            assert_eq!(b.get(RewardTerm::Drag), (low && fast) as u8 as f64);
        }
    }

    #[test]
    fn joint_limit_positive_part() {
        let mut t = Tick::nominal();
        t.robot.q[1] = GO1_JOINT_MAX[1] + 0.2;
        t.robot.q[2] = GO1_JOINT_MIN[2] - 0.1;
        let b = t.eval(0.0);
        assert_relative_eq!(b.get(RewardTerm::JointLimits), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn stance_gate_on_deviation() {
        let mut t = Tick::nominal();
        t.robot.q[0] += 0.2;
        assert_relative_eq!(t.eval(0.0).get(RewardTerm::JointDev), 0.3, epsilon = 1e-12);
        t.command.vx = 0.3;
        assert_relative_eq!(t.eval(0.0).get(RewardTerm::JointDev), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn action_rate_uses_clipped_targets() {
        let mut t = Tick::nominal();
        t.action[0] = 150.0;
        t.last_action[0] = 96.0;
        assert_relative_eq!(t.eval(0.0).get(RewardTerm::ActionRate), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn danger_and_collision() {
        let mut t = Tick::nominal();
        t.object.v_r = [1.2, 0.0, 0.0];
        t.robot.thigh_calf_force[3] = 0.5;
        let b = t.eval(0.0);
        assert_eq!(b.get(RewardTerm::ObjDanger), 1.0);
        assert_eq!(b.get(RewardTerm::Collision), 1.0);
    }

    #[test]
    fn termination_rules() {
        let cfg = RewardConfig::default();
        let robot = RobotState::standing(0.3);
        let resting = ObjectState {
            p_r: [0.0, 0.0, 0.08],
            ..Default::default()
        };
        assert_eq!(check_termination(&robot, &resting, &cfg), None);
        let fallen = ObjectState {
            p_r: [0.0, 0.0, -0.10],
            ..Default::default()
        };
        assert_eq!(check_termination(&robot, &fallen, &cfg), Some(TerminationReason::ObjectFallen));
        let mut down = robot.clone();
        down.body_ground_force = 3.0;
        assert_eq!(
            check_termination(&down, &resting, &cfg),
            Some(TerminationReason::BodyGroundContact)
        );
    }

    #[test]
    fn wrong_sign_weight_rejected() {
        let mut cfg = RewardConfig::default();
        cfg.weights.drag = 1.0;
        assert!(cfg.validate().is_err());
    }
}
