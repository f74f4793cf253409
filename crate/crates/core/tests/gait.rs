use proptest::prelude::*;
use tactile_loco::gait::{f_sym, gait_reward, gamma_sym, FootContactState, GaitTracker, SymParams};
use tactile_loco::replay::{gait_sequence, GaitPattern};

fn params() -> impl Strategy<Value = SymParams> {
    (0.05..0.5f64, 0.5..5.0f64, 0.2..1.0f64, -1.0..-0.1f64).prop_map(|(alpha_tol, alpha1, f_ub, f_lb)| SymParams {
        alpha_tol,
        alpha1,
        f_ub,
        f_lb,
    })
}

/// Piecewise form: rising ramp, linear decline to zero at the tolerance,
/// then a steeper decline clamped at the dynamic lower bound.
fn f_sym_oracle(t: f64, tp: f64, ta: f64, p: &SymParams) -> f64 {
    let ramp = (p.alpha1 * t).min(p.f_ub);
    let t_diff = tp - ta;
    if t_diff <= 0.0 || ta <= 0.0 {
        return ramp.max(p.f_lb);
    }
    let t_tol = (1.0 + p.alpha_tol) * ta;
    let t_ext = t_tol - t_diff;
    let v_ext = (p.alpha1 * t_ext).max(0.0).min(p.f_ub);
    let f = if t <= t_ext {
        ramp
    } else if t <= t_tol {
        v_ext - v_ext / t_diff * (t - t_ext)
    } else {
        let f_dlb = t_diff / (p.alpha_tol * ta) * p.f_lb;
        let clamp = f_dlb.max(p.f_lb);
        if t_ext > ta {
            (v_ext / (t_ext - ta) * (t_tol - t)).max(clamp)
        } else {
            clamp
        }
    };
    f.max(p.f_lb).min(p.f_ub)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1024))]

    #[test]
    fn score_stays_in_bounds(p in params(), t in 0.0..3.0f64, tp in 0.0..2.0f64, ta in 0.0..2.0f64) {
        let f = f_sym(t, tp, ta, &p);
        prop_assert!(f >= p.f_lb && f <= p.f_ub);
    }

    #[test]
    fn zero_at_tolerance(p in params(), ta in 0.01..2.0f64, d in 1e-6..2.0f64) {
        let t_tol = (1.0 + p.alpha_tol) * ta;
        prop_assert_eq!(f_sym(t_tol, ta + d, ta, &p), 0.0);
    }

    #[test]
    fn larger_asymmetry_never_scores_better(p in params(), ta in 0.01..2.0f64, d1 in 0.0..2.0f64, d2 in 0.0..2.0f64) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(f_sym(ta, ta + hi, ta, &p) <= f_sym(ta, ta + lo, ta, &p));
    }

    #[test]
    fn shorter_swing_branch_is_clamped_ramp(p in params(), t in 0.0..3.0f64, ta in 0.0..2.0f64, d in 0.0..1.0f64) {
        let tp = (ta - d).max(0.0);
        prop_assert_eq!(f_sym(t, tp, ta, &p), (p.alpha1 * t).min(p.f_ub));
    }

    #[test]
    fn matches_piecewise_oracle(p in params(), t in 0.0..3.0f64, ta in 0.0..2.0f64, tp in 0.0..3.0f64) {
        let got = f_sym(t, tp, ta, &p);
        let want = f_sym_oracle(t, tp, ta, &p);
        prop_assert!((got - want).abs() <= 1e-12, "{} vs {}", got, want);
    }

    #[test]
    fn gamma_passes_negative_scores(f in -1.0..1.0f64, a in 0.0..1.0f64) {
        prop_assert_eq!(gamma_sym(true, f, a), 1.0);
        let g = gamma_sym(false, f, a);
        if f < 0.0 { prop_assert_eq!(g, f); } else { prop_assert_eq!(g, a * f); }
    }

    #[test]
    fn gait_reward_bounds(contacts in prop::collection::vec(any::<[bool; 4]>(), 1..200), a in 0.0..1.0f64, dt in 0.005..0.05f64) {
        let p = SymParams::default();
        let mut tr = GaitTracker::new();
        for c in contacts {
            let s = FootContactState { contact: c };
            tr.update(&s, dt, false);
            let r = gait_reward(&s, &tr, a, &p);
            prop_assert!((-1.0..=2.0).contains(&r), "{}", r);
        }
    }

    #[test]
    fn tracker_json_round_trip(contacts in prop::collection::vec(any::<[bool; 4]>(), 0..50)) {
        let mut tr = GaitTracker::new();
        for c in contacts {
            tr.update(&FootContactState { contact: c }, 0.02, false);
        }
        prop_assert_eq!(GaitTracker::from_json(&tr.to_json()).unwrap(), tr);
    }
}

#[test]
fn command_change_clears_previous_swings() {
    let mut tr = GaitTracker::new();
    for c in gait_sequence(GaitPattern::Trot, 0.3, 0.02, 60) {
        tr.update(&c, 0.02, false);
    }
    tr.update(&FootContactState::all_contact(), 0.02, false);
    assert!(tr.pairs.iter().all(|p| p.t_prev > 0.0));
    tr.update(&FootContactState::all_contact(), 0.02, true);
    assert!(tr.pairs.iter().all(|p| p.t_prev == 0.0));
}

#[test]
fn trot_beats_other_gaits() {
    let p = SymParams::default();
    let total = |pattern, swing| {
        let mut tr = GaitTracker::new();
        gait_sequence(pattern, swing, 0.02, 500)
            .iter()
            .map(|c| {
                tr.update(c, 0.02, false);
                gait_reward(c, &tr, 1.0, &p)
            })
            .sum::<f64>()
    };
    for swing in [0.2, 0.3, 0.4] {
        let trot = total(GaitPattern::Trot, swing);
        for other in [GaitPattern::Pace, GaitPattern::Bound, GaitPattern::AsymmetricTrot] {
            assert!(trot > total(other, swing), "{other:?} at swing {swing}");
        }
    }
}
