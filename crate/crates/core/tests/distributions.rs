use std::sync::OnceLock;

use proptest::prelude::*;
use robust_qcd::{huber_solve, kl_divergence, Distribution1D, Seed};

fn laws() -> &'static [(&'static str, Distribution1D)] {
    static LAWS: OnceLock<Vec<(&'static str, Distribution1D)>> = OnceLock::new();
    LAWS.get_or_init(build_laws)
}

fn build_laws() -> Vec<(&'static str, Distribution1D)> {
    let n0 = Distribution1D::gaussian(0.0, 1.0);
    let n1 = Distribution1D::gaussian(1.0, 1.0);
    let s = huber_solve(&n0, &n1, 0.05).unwrap();
    vec![
        ("gaussian", Distribution1D::gaussian(-0.3, 2.0)),
        ("exponential", Distribution1D::exponential(2.0)),
        (
            "mixture",
            Distribution1D::mixture(
                vec![0.95, 0.05],
                vec![
                    Distribution1D::gaussian(0.0, 1.0),
                    Distribution1D::gaussian(0.0, 10.0),
                ],
            )
            .unwrap(),
        ),
        (
            "censored0",
            Distribution1D::huber_censored0(n0.clone(), n1.clone(), 0.05, s.b)
                .unwrap()
                .with_sampling_table()
                .unwrap(),
        ),
        (
            "censored1",
            Distribution1D::huber_censored1(n0, n1, 0.05, s.a)
                .unwrap()
                .with_sampling_table()
                .unwrap(),
        ),
    ]
}

/// Composite Simpson between consecutive break points, 200k panels each.
fn simpson_mass(d: &Distribution1D) -> f64 {
    let (lo, hi) = d.support();
    let lo = if lo.is_finite() { lo } else { -60.0 };
    let hi = if hi.is_finite() { hi } else { 60.0 };
    let mut cuts = vec![lo, hi];
    cuts.extend(d.break_points().into_iter().filter(|x| *x > lo && *x < hi));
    cuts.sort_by(f64::total_cmp);
    let n = 200_000;
    cuts.windows(2)
        .map(|w| {
            let h = (w[1] - w[0]) / n as f64;
            let mut s = d.density(w[0]) + d.density(w[1]);
            for i in 1..n {
                let x = w[0] + h * i as f64;
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * d.density(x);
            }
            s * h / 3.0
        })
        .sum()
}

#[test]
fn densities_integrate_to_one() {
    for (name, d) in laws().iter() {
        let mass = simpson_mass(d);
        assert!((mass - 1.0).abs() < 1e-8, "{name}: {mass}");
        assert!((d.total_mass(1e-10).unwrap() - 1.0).abs() < 1e-8, "{name}");
    }
}

#[test]
fn samples_follow_the_cdf() {
    for (name, d) in laws().iter() {
        let mut xs = d.sample(Seed::new(11, 3), 100_000).unwrap();
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = d.cdf(x);
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0f64, f64::max);
        assert!(ks <= 0.01, "{name}: KS distance {ks}");
    }
}

proptest! {
    #[test]
    fn cdf_is_monotone(a in -30.0f64..30.0, b in -30.0f64..30.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for (name, d) in laws().iter() {
            let (fl, fh) = (d.cdf(lo), d.cdf(hi));
            prop_assert!(fl <= fh, "{}: F({}) = {} > F({}) = {}", name, lo, fl, hi, fh);
            prop_assert!((0.0..=1.0).contains(&fl) && (0.0..=1.0).contains(&fh));
        }
    }

    #[test]
    fn quantile_inverts_cdf(u in 0.001f64..0.999) {
        for (name, d) in laws().iter() {
            let x = d.quantile(u);
            prop_assert!((d.cdf(x) - u).abs() < 1e-9, "{}: cdf(quantile({})) = {}", name, u, d.cdf(x));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn kl_is_nonnegative(m0 in -2.0f64..2.0, s0 in 0.3f64..3.0, m1 in -2.0f64..2.0, s1 in 0.3f64..3.0, w in 0.0f64..0.3) {
        let p = Distribution1D::gaussian(m0, s0);
        let q = Distribution1D::mixture(
            vec![1.0 - w, w],
            vec![Distribution1D::gaussian(m1, s1), Distribution1D::gaussian(m0, s0)],
        ).unwrap();
        prop_assert!(kl_divergence(&p, &q).unwrap() >= -1e-8);
        prop_assert!(kl_divergence(&q, &p).unwrap() >= -1e-8);
        prop_assert!(kl_divergence(&p, &Distribution1D::gaussian(m1, s1)).unwrap() >= 0.0);
    }
}
