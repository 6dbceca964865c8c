//! Reference implementations shared by the integration tests.
#![allow(dead_code)]

use robust_qcd::distributions::log_sum_exp;
use robust_qcd::Distribution1D;

/// `max_{1<=k<=n} sum_{i=k}^n l_i`, summed left to right per start.
pub fn cusum_oracle(ls: &[f64]) -> f64 {
    (0..ls.len())
        .map(|k| ls[k..].iter().sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Log posterior odds `log [sum_k pi_k exp(sum_{i>=k} l_i) / (1-rho)^n]`.
pub fn shiryaev_oracle(ls: &[f64], rho: f64) -> f64 {
    let n = ls.len();
    let terms = (1..=n)
        .map(|k| rho.ln() + (k as f64 - 1.0) * (1.0 - rho).ln() + ls[k - 1..].iter().sum::<f64>());
    log_sum_exp(terms) - n as f64 * (1.0 - rho).ln()
}

/// GLR statistic by brute force over a θ grid of step `1e-4`.
pub fn glr_grid_oracle(xs: &[f64], lo: f64, hi: f64, window: usize) -> f64 {
    let n = xs.len();
    let first = n.saturating_sub(window);
    let steps = ((hi - lo) / 1e-4).round() as usize;
    let mut best = f64::NEG_INFINITY;
    for j in 0..=steps {
        let theta = lo + (hi - lo) * j as f64 / steps as f64;
        let mut s = 0.0;
        for (m, &x) in xs[first..].iter().rev().enumerate() {
            s += x;
            best = best.max(theta * s - 0.5 * theta * theta * (m + 1) as f64);
        }
    }
    best
}

/// Cumulative trapezoid tables of the N(0,1) and N(1,1) densities on a
/// uniform grid, and the Huber thresholds they imply.
///
/// The likelihood ratio is `exp(x - 1/2)`, so `{L <= t}` is `{x <= 1/2 + ln t}`.
pub struct HuberGridOracle {
    lo: f64,
    h: f64,
    f0: Vec<f64>,
    f1: Vec<f64>,
}

impl HuberGridOracle {
    pub fn new() -> Self {
        let (lo, hi, h) = (-40.0f64, 41.0f64, 1e-4f64);
        let n = ((hi - lo) / h).round() as usize;
        let p0 = Distribution1D::gaussian(0.0, 1.0);
        let p1 = Distribution1D::gaussian(1.0, 1.0);
        let cumulate = |d: &Distribution1D| {
            let mut f = Vec::with_capacity(n + 1);
            f.push(0.0);
            let mut prev = d.density(lo);
            for i in 1..=n {
                let cur = d.density(lo + h * i as f64);
                f.push(f[i - 1] + 0.5 * h * (prev + cur));
                prev = cur;
            }
            f
        };
        HuberGridOracle {
            lo,
            h,
            f0: cumulate(&p0),
            f1: cumulate(&p1),
        }
    }

    fn interp(&self, f: &[f64], x: f64) -> f64 {
        let u = ((x - self.lo) / self.h).clamp(0.0, (f.len() - 1) as f64);
        let i = (u.floor() as usize).min(f.len() - 2);
        let w = u - i as f64;
        f[i] * (1.0 - w) + f[i + 1] * w
    }

    /// `(P0(L <= t), P1(L > t))`.
    pub fn split(&self, t: f64) -> (f64, f64) {
        let x = 0.5 + t.ln();
        (self.interp(&self.f0, x), 1.0 - self.interp(&self.f1, x))
    }

    pub fn lhs_b(&self, eps: f64, b: f64) -> f64 {
        let (m0, m1) = self.split(b);
        (1.0 - eps) * (m0 + m1 / b)
    }

    pub fn lhs_a(&self, eps: f64, a: f64) -> f64 {
        let (m0, m1) = self.split(a);
        (1.0 - eps) * (m1 + a * m0)
    }

    /// `(a, b)` by bisection in `ln t` to `1e-12`.
    pub fn thresholds(&self, eps: f64) -> (f64, f64) {
        let root = |g: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64| {
            // g(lo) > 1 > g(hi)
            while (hi - lo).abs() > 1e-12 {
                let mid = 0.5 * (lo + hi);
                if g(mid) > 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let ln_b = root(&|u: f64| self.lhs_b(eps, u.exp()), 0.0, 40.0);
        let ln_a = root(&|u: f64| self.lhs_a(eps, u.exp()), 0.0, -40.0);
        (ln_a.exp(), ln_b.exp())
    }

    /// Largest ε with `a < b`: `(1 - ε)(P0(L <= 1) + P1(L > 1)) = 1`.
    pub fn degeneracy_limit(&self) -> f64 {
        let (m0, m1) = self.split(1.0);
        1.0 - 1.0 / (m0 + m1)
    }
}
