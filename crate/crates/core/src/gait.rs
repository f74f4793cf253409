//! Adaptive trotting reward driven by diagonal-pair air-time symmetry.
//!
//! Each diagonal pair keeps its running air time and the air time of its
//! last completed swing. While a pair swings, the symmetricity score
//! [`f_sym`] compares its current air time against the alternative pair's
//! previous swing: a pair that swung shorter last time is rewarded for
//! swinging longer (up to a cap), a pair that swung longer is rewarded only
//! up to a tolerance and then penalised, more harshly the larger the
//! previous mismatch.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Leg index order: front-right, front-left, rear-right, rear-left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Foot {
    FR = 0,
    FL = 1,
    RR = 2,
    RL = 3,
}

impl Foot {
    pub const ALL: [Foot; 4] = [Foot::FR, Foot::FL, Foot::RR, Foot::RL];
}

/// Diagonal pairs: (FR, RL) and (FL, RR).
pub const DIAG_PAIRS: [(Foot, Foot); 2] = [(Foot::FR, Foot::RL), (Foot::FL, Foot::RR)];

/// Adjacent (lateral) pairs.
pub const LAT_PAIRS: [(Foot, Foot); 4] = [
    (Foot::FR, Foot::FL),
    (Foot::FL, Foot::RL),
    (Foot::RL, Foot::RR),
    (Foot::RR, Foot::FR),
];

/// Ground contact per foot, true = in contact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FootContactState {
    pub contact: [bool; 4],
}

impl FootContactState {
    pub fn new(fr: bool, fl: bool, rr: bool, rl: bool) -> Self {
        FootContactState {
            contact: [fr, fl, rr, rl],
        }
    }

    pub fn all_contact() -> Self {
        FootContactState { contact: [true; 4] }
    }

    #[inline]
    pub fn get(&self, foot: Foot) -> bool {
        self.contact[foot as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SymParams {
    /// Tolerated air-time excess over the reference, as a ratio.
    pub alpha_tol: f64,
    /// Rising slope, 1/s.
    pub alpha1: f64,
    pub f_ub: f64,
    pub f_lb: f64,
}

impl Default for SymParams {
    fn default() -> Self {
        SymParams {
            alpha_tol: 0.2,
            alpha1: 2.0,
            f_ub: 1.0,
            f_lb: -1.0,
        }
    }
}

impl SymParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |r: &str| Err(ConfigError::invalid("sym", r));
        if !(self.alpha_tol > 0.0 && self.alpha_tol.is_finite()) {
            return bad("alpha_tol must be positive");
        }
        if !(self.alpha1 > 0.0 && self.alpha1.is_finite()) {
            return bad("alpha1 must be positive");
        }
        if !(-1.0 <= self.f_lb && self.f_lb < 0.0 && 0.0 < self.f_ub && self.f_ub <= 1.0) {
            return bad("require -1 <= f_lb < 0 < f_ub <= 1");
        }
        Ok(())
    }
}

/// Symmetricity score of the current swing.
///
/// `t_curr` is the pair's running air time, `t_prev` its last completed
/// swing and `t_prev_alt` the other pair's last completed swing (all s).
pub fn f_sym(t_curr: f64, t_prev: f64, t_prev_alt: f64, p: &SymParams) -> f64 {
    debug_assert!(
        t_curr >= 0.0 && t_prev >= 0.0 && t_prev_alt >= 0.0,
        "air times must be non-negative"
    );
    let rising = (p.alpha1 * t_curr).min(p.f_ub);
    let t_diff = t_prev - t_prev_alt;
    // No reference swing yet behaves like the shorter-swing case.
    if t_diff <= 0.0 || t_prev_alt <= 0.0 {
        return rising.clamp(p.f_lb, p.f_ub);
    }

    let t_tol = (1.0 + p.alpha_tol) * t_prev_alt;
    let t_ext = t_tol - t_diff;
    let v_ext = (p.alpha1 * t_ext).clamp(0.0, p.f_ub);

    let f = if t_curr <= t_ext {
        rising
    } else if t_curr <= t_tol {
        v_ext * (t_tol - t_curr) / t_diff
    } else {
        let floor = ((t_diff / (p.alpha_tol * t_prev_alt)) * p.f_lb).max(p.f_lb);
        if t_ext > t_prev_alt {
            let slope = -v_ext / (t_ext - t_prev_alt);
            (slope * (t_curr - t_tol)).max(floor)
        } else {
            floor
        }
    };
    f.clamp(p.f_lb, p.f_ub)
}

/// Diagonal-pair weight: 1 in stance, task-scaled score in swing.
/// Negative scores pass through unscaled.
pub fn gamma_sym(pair_in_contact: bool, f: f64, alpha_task: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&alpha_task));
    if pair_in_contact {
        1.0
    } else if f >= 0.0 {
        alpha_task * f
    } else {
        f
    }
}

/// Air-time bookkeeping for one diagonal pair.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PairAirTime {
    /// Running air time of each foot of the pair, s.
    pub foot_air: [f64; 2],
    /// Mean running air time while both feet swing, s.
    pub t_curr: f64,
    /// Last completed swing of this pair, s.
    pub t_prev: f64,
}

/// Air-time state of both diagonal pairs for one environment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GaitTracker {
    pub pairs: [PairAirTime; 2],
}

impl GaitTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reference air time for pair `k`: the other pair's last swing.
    pub fn t_prev_alt(&self, k: usize) -> f64 {
        self.pairs[1 - k].t_prev
    }

    pub fn pair_swinging(&self, k: usize) -> bool {
        self.pairs[k].t_curr > 0.0
    }

    /// Advances air times by `dt` for the contact state observed this tick.
    pub fn update(&mut self, state: &FootContactState, dt: f64, command_changed: bool) {
        debug_assert!(dt > 0.0);
        if command_changed {
            for p in &mut self.pairs {
                p.t_prev = 0.0;
            }
        }
        for (k, &(a, b)) in DIAG_PAIRS.iter().enumerate() {
            let pair = &mut self.pairs[k];
            for (slot, foot) in [a, b].into_iter().enumerate() {
                if state.get(foot) {
                    pair.foot_air[slot] = 0.0;
                } else {
                    pair.foot_air[slot] += dt;
                }
            }
            let both_air = !state.get(a) && !state.get(b);
            if both_air {
                pair.t_curr = 0.5 * (pair.foot_air[0] + pair.foot_air[1]);
            } else if pair.t_curr > 0.0 {
                // touchdown closes the swing
                pair.t_prev = pair.t_curr;
                pair.t_curr = 0.0;
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tracker serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Adaptive gait reward for one tick.
pub fn gait_reward(state: &FootContactState, tracker: &GaitTracker, alpha_task: f64, p: &SymParams) -> f64 {
    let mut diag = 0.0;
    for (k, &(i, j)) in DIAG_PAIRS.iter().enumerate() {
        let (ci, cj) = (state.get(i), state.get(j));
        if ci != cj {
            continue;
        }
        let gamma = if ci {
            1.0
        } else {
            let pair = &tracker.pairs[k];
            let f = f_sym(pair.t_curr, pair.t_prev, tracker.t_prev_alt(k), p);
            gamma_sym(false, f, alpha_task)
        };
        diag += gamma;
    }
    let lat = LAT_PAIRS.iter().filter(|&&(i, j)| state.get(i) != state.get(j)).count();
    0.5 * diag + 0.25 * lat as f64
}

/// Kernels for the task-performance score gating positive symmetry reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlphaTaskParams {
    pub sigma_vxy: f64,
    pub sigma_obj: f64,
}

impl Default for AlphaTaskParams {
    fn default() -> Self {
        AlphaTaskParams {
            sigma_vxy: 0.25,
            sigma_obj: 0.05,
        }
    }
}

/// Task score in [0, 1]: equal blend of velocity tracking and how centred
/// the object sits, each through an exponential kernel.
pub fn alpha_task(v_xy: [f64; 2], cmd_xy: [f64; 2], obj_offset_xy: [f64; 2], p: &AlphaTaskParams) -> f64 {
    let dv = (v_xy[0] - cmd_xy[0]).hypot(v_xy[1] - cmd_xy[1]);
    let dp = obj_offset_xy[0].hypot(obj_offset_xy[1]);
    (0.5 * (-dv / p.sigma_vxy).exp() + 0.5 * (-dp / p.sigma_obj).exp()).clamp(0.0, 1.0)
}
