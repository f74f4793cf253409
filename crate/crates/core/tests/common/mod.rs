#![allow(dead_code)]

use rand::Rng;
use tactile_loco::gait::FootContactState;
use tactile_loco::reward::{Joints, ObjectState, RobotState, VelocityCommand};

pub fn sym<R: Rng>(rng: &mut R, b: f64) -> f64 {
    rng.random_range(-b..=b)
}

fn joints<R: Rng>(rng: &mut R, b: f64) -> Joints {
    std::array::from_fn(|_| sym(rng, b))
}

pub fn random_robot<R: Rng>(rng: &mut R) -> RobotState {
    let mut r = RobotState::standing(0.3);
    r.p_w = [sym(rng, 2.0), sym(rng, 2.0), rng.random_range(0.15..0.45)];
    r.v_r = [sym(rng, 1.0), sym(rng, 1.0), sym(rng, 0.3)];
    r.theta_w = [sym(rng, 0.3), sym(rng, 0.3), sym(rng, 3.0)];
    r.w_r = [sym(rng, 1.0), sym(rng, 1.0), sym(rng, 1.5)];
    let dq = joints(rng, 1.0);
    for j in 0..12 {
        r.q[j] += dq[j];
    }
    r.q_dot = joints(rng, 10.0);
    r.q_ddot = joints(rng, 300.0);
    r.tau = joints(rng, 30.0);
    for f in 0..4 {
        r.foot_pos_w[f][2] = rng.random_range(0.0..0.1);
        r.foot_vel_w[f] = [sym(rng, 1.5), sym(rng, 1.5), sym(rng, 0.5)];
        r.foot_force_w[f] = [sym(rng, 5.0), sym(rng, 5.0), rng.random_range(0.0..60.0)];
    }
    r.thigh_calf_force = std::array::from_fn(|_| if rng.random_bool(0.2) { rng.random_range(0.0..5.0) } else { 0.0 });
    r
}

pub fn random_object<R: Rng>(rng: &mut R) -> ObjectState {
    ObjectState {
        p_r: [sym(rng, 0.2), sym(rng, 0.15), rng.random_range(-0.02..0.25)],
        v_r: [sym(rng, 1.0), sym(rng, 1.0), sym(rng, 0.3)],
        theta_r: [sym(rng, 0.5), sym(rng, 0.2), sym(rng, 1.0)],
        w_r: [sym(rng, 1.0), sym(rng, 1.0), sym(rng, 1.0)],
        p_w_xy: [sym(rng, 2.0), sym(rng, 2.0)],
    }
}

pub fn random_contacts<R: Rng>(rng: &mut R) -> FootContactState {
    FootContactState::new(rng.random(), rng.random(), rng.random(), rng.random())
}

pub fn random_command<R: Rng>(rng: &mut R) -> VelocityCommand {
    if rng.random_bool(0.1) {
        VelocityCommand::default()
    } else {
        VelocityCommand::new(sym(rng, 0.6), sym(rng, 0.6), sym(rng, 1.0))
    }
}

pub fn random_action<R: Rng>(rng: &mut R) -> Joints {
    joints(rng, 150.0)
}
