//! Policy observations and action-to-target conversion.
//!
//! Per-step layout (58 entries):
//!
//! | slice    | group                                      |
//! |----------|--------------------------------------------|
//! | 0..3     | object position (robot frame)              |
//! | 3..7     | object orientation quaternion (w, x, y, z) |
//! | 7..10    | object linear velocity                     |
//! | 10..13   | object angular velocity                    |
//! | 13..16   | projected gravity                          |
//! | 16..19   | base angular velocity                      |
//! | 19..31   | joint positions                            |
//! | 31..43   | joint velocities                           |
//! | 43..46   | velocity command                           |
//! | 46..58   | last action                                |

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::reward::{Joints, Vec3};

pub const OBS_DIM: usize = 58;
pub const OBJECT_DIM: usize = 13;
pub const HISTORY_LEN: usize = 6;
pub const FLAT_DIM: usize = 340;

/// Additive uniform noise bound and post-noise scale for one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseTerm {
    pub noise: f64,
    pub scale: f64,
}

const fn term(noise: f64, scale: f64) -> NoiseTerm {
    NoiseTerm { noise, scale }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObsNoiseSpec {
    pub object_pos: NoiseTerm,
    pub object_linvel: NoiseTerm,
    /// Noise on Euler angles; scale applies to the quaternion.
    pub object_orient: NoiseTerm,
    pub object_angvel: NoiseTerm,
    pub gravity: NoiseTerm,
    pub base_angvel: NoiseTerm,
    pub joint_pos: NoiseTerm,
    pub joint_vel: NoiseTerm,
    pub command: NoiseTerm,
    pub last_action: NoiseTerm,
}

impl Default for ObsNoiseSpec {
    fn default() -> Self {
        ObsNoiseSpec {
            object_pos: term(0.01, 1.0),
            object_linvel: term(0.2, 0.5),
            object_orient: term(0.05, 1.0),
            object_angvel: term(0.2, 0.25),
            gravity: term(0.05, 1.0),
            base_angvel: term(0.2, 0.25),
            joint_pos: term(0.01, 1.0),
            joint_vel: term(1.5, 0.05),
            command: term(0.0, 1.0),
            last_action: term(0.0, 1.0),
        }
    }
}

impl ObsNoiseSpec {
    /// Same scales, all noise ranges zero.
    pub fn noiseless(&self) -> Self {
        let z = |t: NoiseTerm| term(0.0, t.scale);
        ObsNoiseSpec {
            object_pos: z(self.object_pos),
            object_linvel: z(self.object_linvel),
            object_orient: z(self.object_orient),
            object_angvel: z(self.object_angvel),
            gravity: z(self.gravity),
            base_angvel: z(self.base_angvel),
            joint_pos: z(self.joint_pos),
            joint_vel: z(self.joint_vel),
            command: z(self.command),
            last_action: z(self.last_action),
        }
    }

    fn terms(&self) -> [NoiseTerm; 10] {
        [
            self.object_pos,
            self.object_linvel,
            self.object_orient,
            self.object_angvel,
            self.gravity,
            self.base_angvel,
            self.joint_pos,
            self.joint_vel,
            self.command,
            self.last_action,
        ]
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for t in self.terms() {
            if !(t.noise >= 0.0 && t.noise.is_finite()) {
                return Err(ConfigError::invalid("obs_noise", "noise ranges must be finite and >= 0"));
            }
            if !(t.scale > 0.0 && t.scale.is_finite()) {
                return Err(ConfigError::invalid("obs_noise", "scales must be positive"));
            }
        }
        Ok(())
    }
}

/// Unprocessed observation groups for one tick.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RawObservation {
    pub object_pos: Vec3,
    /// Roll, pitch, yaw, rad.
    pub object_euler: Vec3,
    pub object_linvel: Vec3,
    pub object_angvel: Vec3,
    pub gravity: Vec3,
    pub base_angvel: Vec3,
    pub joint_pos: Joints,
    pub joint_vel: Joints,
    pub command: Vec3,
    pub last_action: Joints,
}

/// Quaternion (w, x, y, z) from intrinsic roll-pitch-yaw (ZYX).
pub fn euler_to_quat(rpy: Vec3) -> [f64; 4] {
    let (sr, cr) = (rpy[0] * 0.5).sin_cos();
    let (sp, cp) = (rpy[1] * 0.5).sin_cos();
    let (sy, cy) = (rpy[2] * 0.5).sin_cos();
    [
        cr * cp * cy + sr * sp * sy,
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
    ]
}

fn noisy_scaled<R: Rng + ?Sized>(out: &mut Vec<f64>, raw: &[f64], t: NoiseTerm, rng: &mut R) {
    for &v in raw {
        let n = if t.noise > 0.0 { rng.random_range(-t.noise..=t.noise) } else { 0.0 };
        out.push(t.scale * (v + n));
    }
}

/// Noisy, scaled 58-entry observation.
///
/// Before the object first touches the robot, the 13 object entries are
/// replaced by standard-normal samples.
pub fn build_observation<R: Rng + ?Sized>(
    raw: &RawObservation,
    spec: &ObsNoiseSpec,
    rng: &mut R,
    object_contacted: bool,
) -> [f64; OBS_DIM] {
    let mut v = Vec::with_capacity(OBS_DIM);
    noisy_scaled(&mut v, &raw.object_pos, spec.object_pos, rng);

    let mut euler = raw.object_euler;
    if spec.object_orient.noise > 0.0 {
        for a in &mut euler {
            *a += rng.random_range(-spec.object_orient.noise..=spec.object_orient.noise);
        }
    }
    noisy_scaled(&mut v, &euler_to_quat(euler), term(0.0, spec.object_orient.scale), rng);

    noisy_scaled(&mut v, &raw.object_linvel, spec.object_linvel, rng);
    noisy_scaled(&mut v, &raw.object_angvel, spec.object_angvel, rng);
    noisy_scaled(&mut v, &raw.gravity, spec.gravity, rng);
    noisy_scaled(&mut v, &raw.base_angvel, spec.base_angvel, rng);
    noisy_scaled(&mut v, &raw.joint_pos, spec.joint_pos, rng);
    noisy_scaled(&mut v, &raw.joint_vel, spec.joint_vel, rng);
    noisy_scaled(&mut v, &raw.command, spec.command, rng);
    noisy_scaled(&mut v, &raw.last_action, spec.last_action, rng);

    if !object_contacted {
        for x in &mut v[..OBJECT_DIM] {
            *x = StandardNormal.sample(rng);
        }
    }
    let mut out = [0.0; OBS_DIM];
    out.copy_from_slice(&v);
    out
}

/// Fixed-length observation history.
///
/// Steps are concatenated oldest to newest (6 × 58 = 348 entries) and the
/// leading 8 entries are dropped, giving 340. Slots not yet filled are
/// zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsWindow {
    steps: VecDeque<[f64; OBS_DIM]>,
}

impl Default for ObsWindow {
    fn default() -> Self {
        Self::new()
    }
}

impl ObsWindow {
    pub const DROPPED: usize = HISTORY_LEN * OBS_DIM - FLAT_DIM;

    pub fn new() -> Self {
        let mut steps = VecDeque::with_capacity(HISTORY_LEN);
        steps.extend(std::iter::repeat_n([0.0; OBS_DIM], HISTORY_LEN));
        ObsWindow { steps }
    }

    pub fn push(&mut self, obs: [f64; OBS_DIM]) {
        self.steps.pop_front();
        self.steps.push_back(obs);
    }

    pub fn flatten(&self) -> [f64; FLAT_DIM] {
        let mut out = [0.0; FLAT_DIM];
        let full = self.steps.iter().flat_map(|s| s.iter().copied()).skip(Self::DROPPED);
        for (dst, v) in out.iter_mut().zip(full) {
            *dst = v;
        }
        out
    }

    /// Inverse of [`flatten`](Self::flatten); the dropped entries of the
    /// oldest step come back as zeros.
    pub fn from_flat(flat: &[f64; FLAT_DIM]) -> Self {
        let mut full = vec![0.0; Self::DROPPED];
        full.extend_from_slice(flat);
        let steps = full
            .chunks(OBS_DIM)
            .map(|c| {
                let mut s = [0.0; OBS_DIM];
                s.copy_from_slice(c);
                s
            })
            .collect();
        ObsWindow { steps }
    }

    /// Step `k` back from the newest (0 = newest).
    pub fn step(&self, k: usize) -> &[f64; OBS_DIM] {
        &self.steps[HISTORY_LEN - 1 - k]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActionSpec {
    pub alpha_action: f64,
    pub clip: f64,
    pub kp: f64,
    pub kd: f64,
    pub q_default: Joints,
}

impl Default for ActionSpec {
    fn default() -> Self {
        ActionSpec {
            alpha_action: 0.25,
            clip: 100.0,
            kp: 25.0,
            kd: 0.5,
            q_default: crate::reward::GO1_DEFAULT_JOINTS,
        }
    }
}

impl ActionSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.clip > 0.0) {
            return Err(ConfigError::invalid("action", "clip bound must be positive"));
        }
        Ok(())
    }
}

/// Joint position targets: clip, scale, offset by the default pose.
pub fn action_to_target(action: &Joints, spec: &ActionSpec) -> Joints {
    std::array::from_fn(|j| spec.alpha_action * action[j].clamp(-spec.clip, spec.clip) + spec.q_default[j])
}

/// PD torque tracking a joint target.
pub fn pd_torque(target: &Joints, q: &Joints, q_dot: &Joints, spec: &ActionSpec) -> Joints {
    std::array::from_fn(|j| spec.kp * (target[j] - q[j]) - spec.kd * q_dot[j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_raw() -> RawObservation {
        RawObservation {
            object_pos: [0.01, -0.02, 0.08],
            object_euler: [0.1, -0.05, 0.3],
            object_linvel: [0.2, 0.0, -0.1],
            object_angvel: [0.4, 0.1, 0.0],
            gravity: [0.0, 0.0, -1.0],
            base_angvel: [0.1, 0.2, 0.3],
            joint_pos: [0.1; 12],
            joint_vel: [10.0; 12],
            command: [0.3, 0.0, 0.1],
            last_action: [0.5; 12],
        }
    }

    #[test]
    fn zero_noise_is_scale_times_raw() {
        let spec = ObsNoiseSpec::default().noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let raw = sample_raw();
        let o = build_observation(&raw, &spec, &mut rng, true);
        assert_eq!(&o[0..3], &raw.object_pos);
        assert_relative_eq!(o[7], 0.5 * 0.2);
        assert_relative_eq!(o[10], 0.25 * 0.4);
        assert_eq!(o[31], 0.5);
        assert_eq!(&o[43..46], &raw.command);
        assert_eq!(&o[46..58], &raw.last_action);
    }

    #[test]
    fn quaternion_unit_norm_under_noise() {
        let spec = ObsNoiseSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let o = build_observation(&sample_raw(), &spec, &mut rng, true);
            let n: f64 = o[3..7].iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn quaternion_of_pure_yaw() {
        let q = euler_to_quat([0.0, 0.0, std::f64::consts::FRAC_PI_2]);
        assert_relative_eq!(q[0], (0.5f64).sqrt(), epsilon = 1e-15);
        assert_relative_eq!(q[3], (0.5f64).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn pre_contact_masks_object_only() {
        let spec = ObsNoiseSpec::default().noiseless();
        let raw = sample_raw();
        let clean = build_observation(&raw, &spec, &mut ChaCha8Rng::seed_from_u64(1), true);
        let masked = build_observation(&raw, &spec, &mut ChaCha8Rng::seed_from_u64(1), false);
        assert_eq!(&clean[OBJECT_DIM..], &masked[OBJECT_DIM..]);
        assert_ne!(&clean[..OBJECT_DIM], &masked[..OBJECT_DIM]);
    }

    #[test]
    fn window_layout() {
        let mut w = ObsWindow::new();
        assert_eq!(w.flatten(), [0.0; FLAT_DIM]);
        let v: [f64; OBS_DIM] = std::array::from_fn(|i| i as f64 + 1.0);
        w.push(v);
        let flat = w.flatten();
        assert_eq!(&flat[FLAT_DIM - OBS_DIM..], &v);
        assert!(flat[..FLAT_DIM - OBS_DIM].iter().all(|&x| x == 0.0));

        for _ in 0..5 {
            w.push(v);
        }
        let flat = w.flatten();
        assert_eq!(&flat[..OBS_DIM - 8], &v[8..]);
        for k in 0..5 {
            let s = OBS_DIM - 8 + k * OBS_DIM;
            assert_eq!(&flat[s..s + OBS_DIM], &v);
        }

        let marker = [7.0; OBS_DIM];
        w.push(marker);
        assert_eq!(w.step(0), &marker);
        assert_eq!(w.step(5), &v);
    }

    #[test]
    fn window_flatten_is_lossless_for_retained_entries() {
        let mut w = ObsWindow::new();
        for k in 0..9 {
            w.push(std::array::from_fn(|i| (k * 100 + i) as f64));
        }
        let back = ObsWindow::from_flat(&w.flatten());
        assert_eq!(back.flatten(), w.flatten());
        for k in 0..5 {
            assert_eq!(back.step(k), w.step(k));
        }
        assert_eq!(&back.step(5)[8..], &w.step(5)[8..]);
    }

    #[test]
    fn action_targets() {
        let spec = ActionSpec::default();
        assert_eq!(action_to_target(&[0.0; 12], &spec), spec.q_default);
        let mut a = [0.0; 12];
        a[4] = 150.0;
        let t = action_to_target(&a, &spec);
        assert_relative_eq!(t[4], spec.q_default[4] + 25.0);
        let t = action_to_target(&[1.0; 12], &spec);
        for j in 0..12 {
            assert_relative_eq!(t[j], spec.q_default[j] + 0.25);
        }
    }

    #[test]
    fn pd_gains() {
        let spec = ActionSpec::default();
        let tau = pd_torque(&[1.0; 12], &[0.0; 12], &[2.0; 12], &spec);
        assert_eq!(tau, [25.0 - 1.0; 12]);
    }
}
