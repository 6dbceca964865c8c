//! Detector recursions against their closed-form definitions.

mod common;

use common::{cusum_oracle, glr_grid_oracle, shiryaev_oracle, HuberGridOracle};
use proptest::prelude::*;
use robust_qcd::detectors::{run_to_alarm, DetectorFamily, DetectorSpec};
use robust_qcd::{
    huber_solve, CusumState, Distribution1D, GlrState, Llr, Seed, ShiryaevState, SrState,
};

/// Closed-form inner supremum, every start in the window.
fn glr_brute(xs: &[f64], lo: f64, hi: f64, window: usize) -> f64 {
    let n = xs.len();
    let mut prefix = vec![0.0];
    for &x in xs {
        prefix.push(prefix.last().unwrap() + x);
    }
    (n.saturating_sub(window)..n)
        .map(|k| {
            let s = prefix[n] - prefix[k];
            let m = (n - k) as f64;
            let theta = (s / m).clamp(lo, hi);
            theta * s - 0.5 * theta * theta * m
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// LLR increments that are multiples of 1/64, so every partial sum is exact.
fn dyadic_llrs(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        (-256i32..=256).prop_map(|k| f64::from(k) / 64.0),
        1..=max_len,
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn cusum_recursion_equals_path_max(ls in dyadic_llrs(15)) {
        let mut s = CusumState::new(f64::INFINITY);
        for (n, &l) in ls.iter().enumerate() {
            s.step(l);
            prop_assert_eq!(s.statistic, cusum_oracle(&ls[..=n]));
        }
    }

    #[test]
    fn shiryaev_recursion_equals_double_sum(
        ls in prop::collection::vec(-3.0f64..3.0, 1..=20),
        rho in prop::sample::select(vec![0.01, 0.1, 0.5]),
    ) {
        let mut s = ShiryaevState::new(rho, f64::INFINITY).unwrap();
        for (n, &l) in ls.iter().enumerate() {
            s.step(l);
            let want = shiryaev_oracle(&ls[..=n], rho);
            prop_assert!((s.statistic() - want).abs() <= 1e-9 * (1.0 + want.abs()), "n={} got {} want {}", n + 1, s.statistic(), want);
        }
    }

    #[test]
    fn glr_pruning_matches_brute_force(
        xs in prop::collection::vec(-2.0f64..3.0, 1..300),
        window in 1usize..120,
        lo in 0.0f64..0.5,
        width in 0.0f64..3.0,
    ) {
        let hi = lo + width;
        let mut s = GlrState::new(lo, hi, window as u64, f64::INFINITY).unwrap();
        for n in 0..xs.len() {
            s.step(xs[n]);
            let want = glr_brute(&xs[..=n], lo, hi, window);
            prop_assert!((s.statistic - want).abs() <= 1e-9 * (1.0 + want.abs()), "n={} got {} want {}", n + 1, s.statistic, want);
            prop_assert!(s.retained() <= window);
        }
    }

    #[test]
    fn glr_full_window_is_unwindowed(xs in prop::collection::vec(-2.0f64..3.0, 1..200)) {
        let mut a = GlrState::new(0.1, 3.0, xs.len() as u64, f64::INFINITY).unwrap();
        let mut b = GlrState::new(0.1, 3.0, u64::MAX, f64::INFINITY).unwrap();
        for &x in &xs {
            a.step(x);
            b.step(x);
            prop_assert_eq!(a.statistic, b.statistic);
        }
    }

    #[test]
    fn statistics_are_monotone_in_each_input(
        ls in prop::collection::vec(-2.0f64..2.0, 1..30),
        idx in any::<prop::sample::Index>(),
        bump in 0.0f64..3.0,
    ) {
        let i = idx.index(ls.len());
        let mut raised = ls.clone();
        raised[i] += bump;
        let run_cusum = |v: &[f64]| {
            let mut s = CusumState::new(f64::INFINITY);
            v.iter().for_each(|&l| { s.step(l); });
            s.statistic
        };
        let run_shiryaev = |v: &[f64]| {
            let mut s = ShiryaevState::new(0.1, f64::INFINITY).unwrap();
            v.iter().for_each(|&l| { s.step(l); });
            s.statistic()
        };
        prop_assert!(run_cusum(&raised) >= run_cusum(&ls));
        prop_assert!(run_shiryaev(&raised) >= run_shiryaev(&ls) - 1e-12);
    }

    #[test]
    fn alarm_time_is_monotone_in_threshold(
        xs in prop::collection::vec(-1.0f64..2.5, 1..200),
        eta1 in -1.0f64..8.0,
        delta in 0.0f64..4.0,
        family in 0usize..4,
    ) {
        let eta2 = eta1 + delta;
        let llr = Some(Llr::Affine { slope: 0.5, intercept: -0.125 });
        let family = match family {
            0 => DetectorFamily::Cusum,
            1 => DetectorFamily::Shiryaev { rho: 0.1 },
            2 => DetectorFamily::Sr { r: 0.0, psi: None },
            _ => DetectorFamily::Glr { window: 50, theta_lo: 0.1, theta_hi: 3.0 },
        };
        let tau = |eta: f64| {
            // Shiryaev–Roberts thresholds are on the likelihood-ratio scale.
            let eta = if matches!(family, DetectorFamily::Sr { .. }) { eta.exp() } else { eta };
            let spec = DetectorSpec::new(family.clone(), eta, llr.clone());
            let det = spec.start(&mut Seed::default().rng()).unwrap();
            let mut it = xs.iter().copied();
            run_to_alarm(det, || it.next().unwrap_or(0.0), xs.len() as u64).tau
        };
        prop_assert!(tau(eta1) <= tau(eta2));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn glr_closed_form_matches_theta_grid(xs in prop::collection::vec(-1.5f64..3.5, 1..=50)) {
        let mut s = GlrState::new(0.1, 3.0, 50, f64::INFINITY).unwrap();
        for n in 0..xs.len() {
            s.step(xs[n]);
            let want = glr_grid_oracle(&xs[..=n], 0.1, 3.0, 50);
            prop_assert!((s.statistic - want).abs() <= 1e-6, "n={} got {} want {}", n + 1, s.statistic, want);
        }
    }
}

#[test]
fn glr_hand_example() {
    let mut s = GlrState::new(0.1, 3.0, 10, f64::INFINITY).unwrap();
    for _ in 0..4 {
        s.step(0.5);
    }
    // k = 1: θ* = 0.5, 0.5 * 2 - 4 * 0.125.
    assert!((s.statistic - 0.5).abs() < 1e-15);
    let mut s = GlrState::new(0.1, 3.0, 10, f64::INFINITY).unwrap();
    s.step(5.0);
    assert!((s.statistic - (3.0 * 5.0 - 4.5)).abs() < 1e-15);
}

#[test]
fn sr_unit_ratio_counts_steps() {
    let mut s = SrState::new(0.0, f64::INFINITY).unwrap();
    for n in 1..=50 {
        s.step(1.0).unwrap();
        assert_eq!(s.statistic, n as f64);
    }
    assert!(s.step(-0.1).is_err());
}

#[test]
fn huber_thresholds_match_grid_oracle() {
    let oracle = HuberGridOracle::new();
    let (p0, p1) = (
        Distribution1D::gaussian(0.0, 1.0),
        Distribution1D::gaussian(1.0, 1.0),
    );
    for eps in [0.001, 0.005, 0.01, 0.05, 0.1, 0.2] {
        let s = huber_solve(&p0, &p1, eps).unwrap();
        let (a, b) = oracle.thresholds(eps);
        assert!((s.a - a).abs() <= 1e-6 * a, "eps {eps}: a {} vs {a}", s.a);
        assert!((s.b - b).abs() <= 1e-6 * b, "eps {eps}: b {} vs {b}", s.b);
        assert!(
            s.residual_a < 1e-8 && s.residual_b < 1e-8,
            "eps {eps}: {s:?}"
        );
        assert!((oracle.lhs_a(eps, s.a) - 1.0).abs() < 1e-6);
        assert!((oracle.lhs_b(eps, s.b) - 1.0).abs() < 1e-6);
    }
    let limit = oracle.degeneracy_limit();
    assert!((limit - 0.2769).abs() < 1e-4, "{limit}");
    assert!((huber_solve(&p0, &p1, 0.05).unwrap().degeneracy_limit - limit).abs() < 1e-6);
}
