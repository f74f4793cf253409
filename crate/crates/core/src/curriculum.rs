//! Velocity-command curriculum, zero-command schedule and domain
//! randomization.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::reward::VelocityCommand;

/// Symmetric command ranges grown in fixed steps.
///
/// Ranges are derived from the stage counters, so they only ever move
/// upward and land exactly on their maxima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VelocityCurriculum {
    pub lin_initial: f64,
    pub ang_initial: f64,
    pub lin_max: f64,
    pub ang_max: f64,
    pub lin_step: f64,
    pub ang_step: f64,
    pub perf_threshold: f64,
    pub survival_threshold: f64,
    pub max_stage_gap: u32,
    pub lin_stage: u32,
    pub ang_stage: u32,
}

impl Default for VelocityCurriculum {
    fn default() -> Self {
        VelocityCurriculum {
            lin_initial: 0.2,
            ang_initial: 0.2,
            lin_max: 0.6,
            ang_max: 1.0,
            lin_step: 0.1,
            ang_step: 0.1,
            perf_threshold: 0.8,
            survival_threshold: 0.9,
            max_stage_gap: 2,
            lin_stage: 0,
            ang_stage: 0,
        }
    }
}

/// Tracking scores in [0, 1] for the linear and angular command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingScores {
    pub lin: f64,
    pub ang: f64,
}

impl VelocityCurriculum {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |r: &str| Err(ConfigError::invalid("curriculum", r));
        if !(self.lin_step > 0.0 && self.ang_step > 0.0) {
            return bad("expansion steps must be positive");
        }
        if !(0.0 < self.lin_initial && self.lin_initial <= self.lin_max) {
            return bad("require 0 < lin_initial <= lin_max");
        }
        if !(0.0 < self.ang_initial && self.ang_initial <= self.ang_max) {
            return bad("require 0 < ang_initial <= ang_max");
        }
        Ok(())
    }

    fn stages_to_max(initial: f64, max: f64, step: f64) -> u32 {
        ((max - initial) / step - 1e-9).ceil().max(0.0) as u32
    }

    pub fn lin_stages_total(&self) -> u32 {
        Self::stages_to_max(self.lin_initial, self.lin_max, self.lin_step)
    }

    pub fn ang_stages_total(&self) -> u32 {
        Self::stages_to_max(self.ang_initial, self.ang_max, self.ang_step)
    }

    /// Current linear bound, m/s.
    pub fn lin_range(&self) -> f64 {
        if self.lin_stage >= self.lin_stages_total() {
            self.lin_max
        } else {
            self.lin_initial + self.lin_stage as f64 * self.lin_step
        }
    }

    /// Current angular bound, rad/s.
    pub fn ang_range(&self) -> f64 {
        if self.ang_stage >= self.ang_stages_total() {
            self.ang_max
        } else {
            self.ang_initial + self.ang_stage as f64 * self.ang_step
        }
    }

    pub fn lin_done(&self) -> bool {
        self.lin_stage >= self.lin_stages_total()
    }

    pub fn ang_done(&self) -> bool {
        self.ang_stage >= self.ang_stages_total()
    }

    pub fn fully_expanded(&self) -> bool {
        self.lin_done() && self.ang_done()
    }

    /// Grows each range by one step when its tracking score and the
    /// survival rate clear their thresholds.
    ///
    /// A dimension more than `max_stage_gap` expansions ahead of the other
    /// pauses until the other catches up; one that has reached its maximum
    /// no longer holds the other back.
    pub fn maybe_expand(&self, scores: TrackingScores, survival_rate: f64) -> VelocityCurriculum {
        let mut next = self.clone();
        if survival_rate < self.survival_threshold {
            return next;
        }
        let gap = self.max_stage_gap;
        let lin_ok = scores.lin >= self.perf_threshold
            && !self.lin_done()
            && (self.ang_done() || self.lin_stage < self.ang_stage + gap);
        let ang_ok = scores.ang >= self.perf_threshold
            && !self.ang_done()
            && (self.lin_done() || self.ang_stage < self.lin_stage + gap);
        if lin_ok {
            next.lin_stage += 1;
        }
        if ang_ok {
            next.ang_stage += 1;
        }
        next
    }

    /// Uniform command within the current ranges.
    pub fn sample_command<R: Rng + ?Sized>(&self, rng: &mut R) -> VelocityCommand {
        let lin = self.lin_range();
        let ang = self.ang_range();
        VelocityCommand::new(
            rng.random_range(-lin..=lin),
            rng.random_range(-lin..=lin),
            rng.random_range(-ang..=ang),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("curriculum serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Zero-command warm-up and standing-environment probability, switched
/// from the initial to the final values once the velocity curriculum is
/// fully expanded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZeroCommandSchedule {
    pub initial_steps: u32,
    pub final_steps: u32,
    pub initial_stand_prob: f64,
    pub final_stand_prob: f64,
}

impl Default for ZeroCommandSchedule {
    fn default() -> Self {
        ZeroCommandSchedule {
            initial_steps: 0,
            final_steps: 50,
            initial_stand_prob: 0.10,
            final_stand_prob: 0.05,
        }
    }
}

impl ZeroCommandSchedule {
    pub fn zero_command_steps(&self, fully_expanded: bool) -> u32 {
        if fully_expanded {
            self.final_steps
        } else {
            self.initial_steps
        }
    }

    pub fn stand_prob(&self, fully_expanded: bool) -> f64 {
        if fully_expanded {
            self.final_stand_prob
        } else {
            self.initial_stand_prob
        }
    }
}

/// Closed interval for uniform sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    pub const fn sym(b: f64) -> Self {
        Range { lo: -b, hi: b }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.hi > self.lo {
            rng.random_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomizationSpec {
    pub object_radius: Range,
    pub object_length: Range,
    pub object_mass: Range,
    pub object_friction: Range,
    pub init_x: Range,
    pub init_y: Range,
    /// Degrees.
    pub init_yaw_deg: Range,
    pub trunk_mass: Range,
    pub trunk_friction: Range,
    pub foot_friction: Range,
    pub init_joint_offset: Range,
    pub init_joint_vel: Range,
    pub object_push: [Range; 3],
    pub trunk_push: [Range; 3],
    /// One push per window at a uniformly drawn tick, s.
    pub push_window_s: f64,
}

impl Default for RandomizationSpec {
    fn default() -> Self {
        RandomizationSpec {
            object_radius: Range::new(0.03, 0.07),
            object_length: Range::new(0.1, 0.4),
            object_mass: Range::new(0.5, 2.5),
            object_friction: Range::new(0.3, 1.0),
            init_x: Range::sym(0.05),
            init_y: Range::sym(0.04),
            init_yaw_deg: Range::sym(30.0),
            trunk_mass: Range::new(4.2, 6.2),
            trunk_friction: Range::new(0.3, 1.0),
            foot_friction: Range::new(0.6, 1.5),
            init_joint_offset: Range::sym(0.03),
            init_joint_vel: Range::sym(0.1),
            object_push: [Range::sym(0.3), Range::sym(0.3), Range::sym(0.2)],
            trunk_push: [Range::sym(0.4), Range::sym(0.3), Range::sym(0.1)],
            push_window_s: 5.0,
        }
    }
}

impl RandomizationSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut all = vec![
            self.object_radius,
            self.object_length,
            self.object_mass,
            self.object_friction,
            self.init_x,
            self.init_y,
            self.init_yaw_deg,
            self.trunk_mass,
            self.trunk_friction,
            self.foot_friction,
            self.init_joint_offset,
            self.init_joint_vel,
        ];
        all.extend(self.object_push);
        all.extend(self.trunk_push);
        if all.iter().any(|r| !(r.lo <= r.hi) || !r.lo.is_finite() || !r.hi.is_finite()) {
            return Err(ConfigError::invalid("randomization", "every range needs lo <= hi"));
        }
        if !(self.push_window_s > 0.0) {
            return Err(ConfigError::invalid("randomization", "push_window_s must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectParams {
    pub radius: f64,
    pub length: f64,
    pub mass: f64,
    pub friction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotParams {
    pub trunk_mass: f64,
    pub trunk_friction: f64,
    pub foot_friction: f64,
    pub joint_offset: [f64; 12],
    pub joint_vel: [f64; 12],
}

/// Randomized initial conditions for one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSetup {
    pub object: ObjectParams,
    pub init_x: f64,
    pub init_y: f64,
    /// rad
    pub init_yaw: f64,
    pub robot: RobotParams,
    pub object_push: [f64; 3],
    pub trunk_push: [f64; 3],
    pub standing: bool,
    pub zero_command_steps: u32,
}

pub fn sample_episode<R: Rng + ?Sized>(
    spec: &RandomizationSpec,
    sched: &ZeroCommandSchedule,
    fully_expanded: bool,
    rng: &mut R,
) -> EpisodeSetup {
    let object = ObjectParams {
        radius: spec.object_radius.sample(rng),
        length: spec.object_length.sample(rng),
        mass: spec.object_mass.sample(rng),
        friction: spec.object_friction.sample(rng),
    };
    let init_x = spec.init_x.sample(rng);
    let init_y = spec.init_y.sample(rng);
    let init_yaw = spec.init_yaw_deg.sample(rng).to_radians();
    let robot = RobotParams {
        trunk_mass: spec.trunk_mass.sample(rng),
        trunk_friction: spec.trunk_friction.sample(rng),
        foot_friction: spec.foot_friction.sample(rng),
        joint_offset: std::array::from_fn(|_| spec.init_joint_offset.sample(rng)),
        joint_vel: std::array::from_fn(|_| spec.init_joint_vel.sample(rng)),
    };
    let object_push = spec.object_push.map(|r| r.sample(rng));
    let trunk_push = spec.trunk_push.map(|r| r.sample(rng));
    let standing = rng.random::<f64>() < sched.stand_prob(fully_expanded);
    EpisodeSetup {
        object,
        init_x,
        init_y,
        init_yaw,
        robot,
        object_push,
        trunk_push,
        standing,
        zero_command_steps: sched.zero_command_steps(fully_expanded),
    }
}

/// Push ticks: one uniformly drawn tick inside each full or partial window.
pub fn push_schedule<R: Rng + ?Sized>(window_s: f64, episode_ticks: usize, dt: f64, rng: &mut R) -> Vec<usize> {
    let per_window = ((window_s / dt).round() as usize).max(1);
    (0..episode_ticks)
        .step_by(per_window)
        .map(|start| rng.random_range(start..(start + per_window).min(episode_ticks)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn met() -> TrackingScores {
        TrackingScores { lin: 1.0, ang: 1.0 }
    }

    #[test]
    fn unmet_thresholds_leave_curriculum_unchanged() {
        let c = VelocityCurriculum::default();
        assert_eq!(c.maybe_expand(TrackingScores { lin: 0.5, ang: 0.5 }, 1.0), c);
        assert_eq!(c.maybe_expand(met(), 0.5), c);
    }

    #[test]
    fn both_met_expand_one_step() {
        let c = VelocityCurriculum::default();
        let n = c.maybe_expand(met(), 1.0);
        assert_eq!((n.lin_stage, n.ang_stage), (1, 1));
        assert!((n.lin_range() - 0.3).abs() < 1e-12);
        assert!((n.ang_range() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn leading_dimension_pauses() {
        let c = VelocityCurriculum {
            lin_stage: 3,
            ang_stage: 1,
            ..Default::default()
        };
        let n = c.maybe_expand(TrackingScores { lin: 1.0, ang: 0.0 }, 1.0);
        assert_eq!(n.lin_stage, 3);
    }

    #[test]
    fn reaches_full_expansion_exactly() {
        let mut c = VelocityCurriculum::default();
        for _ in 0..50 {
            c = c.maybe_expand(met(), 1.0);
        }
        assert!(c.fully_expanded());
        assert_eq!(c.lin_range(), 0.6);
        assert_eq!(c.ang_range(), 1.0);
        assert_eq!((c.lin_stages_total(), c.ang_stages_total()), (4, 8));
    }

    #[test]
    fn curriculum_json_checkpoint() {
        let c = VelocityCurriculum::default().maybe_expand(met(), 1.0);
        assert_eq!(VelocityCurriculum::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn schedule_values() {
        let s = ZeroCommandSchedule::default();
        assert_eq!(s.zero_command_steps(false), 0);
        assert_eq!(s.zero_command_steps(true), 50);
        assert_eq!(s.stand_prob(false), 0.10);
        assert_eq!(s.stand_prob(true), 0.05);
    }

    #[test]
    fn episode_samples_respect_ranges() {
        let spec = RandomizationSpec::default();
        let sched = ZeroCommandSchedule::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let e = sample_episode(&spec, &sched, false, &mut rng);
            assert!(spec.object_mass.contains(e.object.mass));
            assert!(spec.object_radius.contains(e.object.radius));
            assert!(e.init_yaw.abs() <= 30f64.to_radians() + 1e-12);
            assert!(e.robot.joint_offset.iter().all(|v| v.abs() <= 0.03));
            assert!(e.trunk_push[0].abs() <= 0.4);
            assert_eq!(e.zero_command_steps, 0);
        }
    }

    #[test]
    fn push_schedule_one_per_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pushes = push_schedule(5.0, 1000, 0.02, &mut rng);
        assert_eq!(pushes.len(), 4);
        for (k, &p) in pushes.iter().enumerate() {
            assert!((k * 250..(k + 1) * 250).contains(&p));
        }
    }
}
