//! Probability laws on the real line.
//!
//! Every law can evaluate its log-density and CDF and can be sampled from a
//! [`Seed`]. Exponential laws are parameterized by rate: `Exponential { theta }`
//! has mean `1 / theta`.
//!
//! The two censored variants are the least favorable densities for a pair of
//! ε-contamination neighborhoods. With `L = p1 / p0` monotone,
//!
//! ```text
//! q0(x) = (1-ε) p0(x)       if L(x) <= b,   (1-ε)/b p1(x)   otherwise
//! q1(x) = (1-ε) p1(x)       if L(x) >  a,   a (1-ε) p0(x)   otherwise
//! ```
//!
//! Both are sampled by inverse CDF from a precomputed table, which has to be
//! built with [`Distribution1D::with_sampling_table`] first.

use std::cell::Cell;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::quadrature::{bisect, integrate_pieces};
use crate::seed::Seed;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Absolute tolerance for divergence integrals.
pub const KL_TOL: f64 = 1e-8;

/// Minimum number of equal-probability knots in a sampling table.
pub const TABLE_KNOTS: usize = 8192;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Distribution1D {
    Gaussian {
        mean: f64,
        sd: f64,
    },
    /// Rate parameterization: mean `1 / theta`.
    Exponential {
        theta: f64,
    },
    Mixture {
        weights: Vec<f64>,
        components: Vec<Distribution1D>,
    },
    HuberCensored0(Censored),
    HuberCensored1(Censored),
}

/// Which half of a least favorable pair a [`Censored`] density represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Pre,
    Post,
}

/// A Huber-censored density built from a nominal pair `(p0, p1)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "CensoredSpec", into = "CensoredSpec")]
pub struct Censored {
    p0: Box<Distribution1D>,
    p1: Box<Distribution1D>,
    eps: f64,
    threshold: f64,
    side: Side,
    /// Point where `L(x)` crosses `threshold`; may be infinite.
    boundary: f64,
    lr_increasing: bool,
    table: Option<Arc<InverseCdfTable>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CensoredSpec {
    side: u8,
    p0: Distribution1D,
    p1: Distribution1D,
    eps: f64,
    threshold: f64,
}

impl TryFrom<CensoredSpec> for Censored {
    type Error = Error;

    fn try_from(s: CensoredSpec) -> Result<Self> {
        let side = match s.side {
            0 => Side::Pre,
            1 => Side::Post,
            other => return Err(Error::InvalidDistribution(format!("censored side {other}"))),
        };
        let mut c = Censored::new(s.p0, s.p1, s.eps, s.threshold, side)?;
        c.table = Some(Arc::new(InverseCdfTable::build(&c)?));
        Ok(c)
    }
}

impl From<Censored> for CensoredSpec {
    fn from(c: Censored) -> Self {
        CensoredSpec {
            side: match c.side {
                Side::Pre => 0,
                Side::Post => 1,
            },
            p0: *c.p0,
            p1: *c.p1,
            eps: c.eps,
            threshold: c.threshold,
        }
    }
}

impl PartialEq for Censored {
    fn eq(&self, other: &Self) -> bool {
        self.side == other.side
            && self.p0 == other.p0
            && self.p1 == other.p1
            && self.eps == other.eps
            && self.threshold == other.threshold
    }
}

impl Censored {
    fn new(
        p0: Distribution1D,
        p1: Distribution1D,
        eps: f64,
        threshold: f64,
        side: Side,
    ) -> Result<Self> {
        p0.validate()?;
        p1.validate()?;
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::InvalidDistribution(format!(
                "eps = {eps} outside [0, 1)"
            )));
        }
        let ok = match side {
            Side::Pre => threshold > 0.0,
            Side::Post => threshold >= 0.0 && threshold.is_finite(),
        };
        if !ok || threshold.is_nan() {
            return Err(Error::InvalidDistribution(format!(
                "censoring threshold {threshold}"
            )));
        }
        let (boundary, lr_increasing) = lr_crossing(&p0, &p1, threshold.ln())?;
        Ok(Censored {
            p0: Box::new(p0),
            p1: Box::new(p1),
            eps,
            threshold,
            side,
            boundary,
            lr_increasing,
            table: None,
        })
    }

    pub fn nominal_pre(&self) -> &Distribution1D {
        &self.p0
    }

    pub fn nominal_post(&self) -> &Distribution1D {
        &self.p1
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `b` for the pre-change density, `a` for the post-change one.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Point where the nominal likelihood ratio crosses the threshold.
    pub fn boundary(&self) -> f64 {
        self.boundary
    }

    pub fn has_table(&self) -> bool {
        self.table.is_some()
    }

    fn log_density(&self, x: f64) -> f64 {
        let l0 = self.p0.log_density(x);
        let l1 = self.p1.log_density(x);
        let log_lr = l1 - l0;
        let log_keep = (1.0 - self.eps).ln();
        let log_t = self.threshold.ln();
        match self.side {
            Side::Pre => {
                if log_lr <= log_t || l1 == f64::NEG_INFINITY {
                    log_keep + l0
                } else {
                    log_keep - log_t + l1
                }
            }
            Side::Post => {
                if log_lr > log_t || l0 == f64::NEG_INFINITY {
                    log_keep + l1
                } else {
                    log_keep + log_t + l0
                }
            }
        }
    }

    /// `(weight, law)` on the left of the boundary and on the right.
    fn pieces(&self) -> ((f64, &Distribution1D), (f64, &Distribution1D)) {
        let keep = 1.0 - self.eps;
        let t = self.threshold;
        // Region where L <= threshold, and its complement.
        let (low_lr, high_lr) = match self.side {
            Side::Pre => ((keep, &*self.p0), (keep / t, &*self.p1)),
            Side::Post => ((t * keep, &*self.p0), (keep, &*self.p1)),
        };
        if self.lr_increasing {
            (low_lr, high_lr)
        } else {
            (high_lr, low_lr)
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        // Normalised so the root-finding slack in the threshold does not leave
        // the law short of unit mass.
        let total = self.raw_cdf(f64::INFINITY);
        (self.raw_cdf(x) / total).clamp(0.0, 1.0)
    }

    fn raw_cdf(&self, x: f64) -> f64 {
        let ((wl, left), (wr, right)) = self.pieces();
        let c = self.boundary;
        let left_mass = if c == f64::NEG_INFINITY {
            0.0
        } else {
            wl * left.cdf(x.min(c))
        };
        let right_mass = if x <= c || c == f64::INFINITY {
            0.0
        } else {
            let base = if c == f64::NEG_INFINITY {
                0.0
            } else {
                right.cdf(c)
            };
            wr * (right.cdf(x) - base).max(0.0)
        };
        left_mass + right_mass
    }
}

/// Locates where `log p1(x) - log p0(x)` crosses `level`.
///
/// Returns the crossing point and whether the log-ratio increases in `x`.
/// The crossing is `±∞` when the level lies outside the ratio's range.
pub(crate) fn lr_crossing(
    p0: &Distribution1D,
    p1: &Distribution1D,
    level: f64,
) -> Result<(f64, bool)> {
    let (lo, hi) = common_range(p0, p1);
    let log_lr = |x: f64| p1.log_density(x) - p0.log_density(x);
    let grid: Vec<f64> = (0..=400)
        .map(|i| lo + (hi - lo) * i as f64 / 400.0)
        .collect();
    let vals: Vec<f64> = grid
        .iter()
        .map(|&x| log_lr(x))
        .filter(|v| v.is_finite())
        .collect();
    let first = vals.first().copied().unwrap_or(0.0);
    let last = vals.last().copied().unwrap_or(0.0);
    let increasing = last >= first;
    let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let monotone = vals.windows(2).all(|w| {
        let d = w[1] - w[0];
        if increasing {
            d >= -1e-9 * scale
        } else {
            d <= 1e-9 * scale
        }
    });
    if !monotone {
        return Err(Error::NonMonotoneLR);
    }
    if level == f64::INFINITY {
        return Ok((
            if increasing {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            },
            increasing,
        ));
    }
    if level == f64::NEG_INFINITY {
        return Ok((
            if increasing {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            },
            increasing,
        ));
    }
    // Extend the search range outward until the level is bracketed, or give up
    // and report the crossing at infinity.
    let (mut a, mut b) = (lo, hi);
    let (sup_lo, sup_hi) = p0.support();
    for _ in 0..60 {
        let fa = log_lr(a) - level;
        let fb = log_lr(b) - level;
        if fa.is_finite() && fb.is_finite() && fa.signum() != fb.signum() {
            let root = bisect(
                |x| log_lr(x) - level,
                a,
                b,
                1e-13 * (1.0 + a.abs().max(b.abs())),
            )?;
            return Ok((root, increasing));
        }
        let width = b - a;
        a = (a - width).max(sup_lo);
        b = (b + width).min(sup_hi);
        if !(a.is_finite() && b.is_finite()) || width > 1e6 {
            break;
        }
    }
    let below = log_lr(0.5 * (lo + hi)) < level;
    // Level above the ratio everywhere: {L <= t} is the whole line.
    let crossing = match (below, increasing) {
        (true, true) => f64::INFINITY,
        (true, false) => f64::NEG_INFINITY,
        (false, true) => f64::NEG_INFINITY,
        (false, false) => f64::INFINITY,
    };
    Ok((crossing, increasing))
}

/// A finite range covering the bulk of both laws.
fn common_range(p0: &Distribution1D, p1: &Distribution1D) -> (f64, f64) {
    let (a0, b0) = p0.bulk_range();
    let (a1, b1) = p1.bulk_range();
    (a0.min(a1), b0.max(b1))
}

/// Tabulated inverse CDF with linear interpolation between knots.
#[derive(Debug, Clone)]
pub struct InverseCdfTable {
    probs: Vec<f64>,
    xs: Vec<f64>,
}

impl InverseCdfTable {
    fn build(c: &Censored) -> Result<Self> {
        let (mut lo, mut hi) = common_range(&c.p0, &c.p1);
        let (sup_lo, sup_hi) = c.p0.support();
        let tail = 1e-13;
        for _ in 0..64 {
            if c.cdf(lo) <= tail || lo <= sup_lo {
                break;
            }
            lo = (lo - (hi - lo)).max(sup_lo);
        }
        for _ in 0..64 {
            if c.cdf(hi) >= 1.0 - tail || hi >= sup_hi {
                break;
            }
            hi = (hi + (hi - lo)).min(sup_hi);
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidDistribution(
                "sampling table range is unbounded".into(),
            ));
        }
        let mut knots: Vec<(f64, f64)> = Vec::with_capacity(TABLE_KNOTS + 64);
        let n = TABLE_KNOTS;
        let p_lo = c.cdf(lo);
        let p_hi = c.cdf(hi);
        for i in 0..n {
            let u = p_lo + (p_hi - p_lo) * i as f64 / (n - 1) as f64;
            let x = if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                bisect(
                    |x| c.cdf(x) - u,
                    lo,
                    hi,
                    1e-13 * (1.0 + lo.abs().max(hi.abs())),
                )?
            };
            knots.push((x, c.cdf(x)));
        }
        // Refine around the censoring boundary, where the density has a kink.
        if c.boundary.is_finite() && c.boundary > lo && c.boundary < hi {
            let span = (hi - lo) / n as f64;
            for k in -16i32..=16 {
                let x = c.boundary + span * f64::from(k) / 8.0;
                if x > lo && x < hi {
                    knots.push((x, c.cdf(x)));
                }
            }
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        knots.dedup_by(|a, b| a.0 == b.0 || a.1 <= b.1);
        let (xs, probs): (Vec<f64>, Vec<f64>) = knots.into_iter().unzip();
        Ok(InverseCdfTable { probs, xs })
    }

    fn invert(&self, u: f64) -> f64 {
        let n = self.probs.len();
        let i = self.probs.partition_point(|&p| p < u);
        if i == 0 {
            return self.xs[0];
        }
        if i >= n {
            return self.xs[n - 1];
        }
        let (p0, p1) = (self.probs[i - 1], self.probs[i]);
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        x0 + (x1 - x0) * (u - p0) / (p1 - p0)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}

impl Distribution1D {
    pub fn gaussian(mean: f64, sd: f64) -> Self {
        Distribution1D::Gaussian { mean, sd }
    }

    pub fn exponential(theta: f64) -> Self {
        Distribution1D::Exponential { theta }
    }

    pub fn mixture(weights: Vec<f64>, components: Vec<Distribution1D>) -> Result<Self> {
        let d = Distribution1D::Mixture {
            weights,
            components,
        };
        d.validate()?;
        Ok(d)
    }

    /// `(1 - eps) * nominal + eps * contaminant`.
    pub fn contaminated(
        nominal: Distribution1D,
        eps: f64,
        contaminant: Distribution1D,
    ) -> Result<Self> {
        Self::mixture(vec![1.0 - eps, eps], vec![nominal, contaminant])
    }

    /// Least favorable pre-change density for censoring threshold `b`.
    pub fn huber_censored0(
        p0: Distribution1D,
        p1: Distribution1D,
        eps: f64,
        b: f64,
    ) -> Result<Self> {
        Ok(Distribution1D::HuberCensored0(Censored::new(
            p0,
            p1,
            eps,
            b,
            Side::Pre,
        )?))
    }

    /// Least favorable post-change density for censoring threshold `a`.
    pub fn huber_censored1(
        p0: Distribution1D,
        p1: Distribution1D,
        eps: f64,
        a: f64,
    ) -> Result<Self> {
        Ok(Distribution1D::HuberCensored1(Censored::new(
            p0,
            p1,
            eps,
            a,
            Side::Post,
        )?))
    }

    /// Builds the inverse-CDF tables of every censored law inside `self`.
    pub fn with_sampling_table(self) -> Result<Self> {
        Ok(match self {
            Distribution1D::HuberCensored0(mut c) => {
                c.table = Some(Arc::new(InverseCdfTable::build(&c)?));
                Distribution1D::HuberCensored0(c)
            }
            Distribution1D::HuberCensored1(mut c) => {
                c.table = Some(Arc::new(InverseCdfTable::build(&c)?));
                Distribution1D::HuberCensored1(c)
            }
            Distribution1D::Mixture {
                weights,
                components,
            } => Distribution1D::Mixture {
                weights,
                components: components
                    .into_iter()
                    .map(|c| c.with_sampling_table())
                    .collect::<Result<_>>()?,
            },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Distribution1D::Gaussian { mean, sd } => {
                if !mean.is_finite() || !(sd.is_finite() && *sd > 0.0) {
                    return Err(Error::InvalidDistribution(format!(
                        "gaussian(mean = {mean}, sd = {sd})"
                    )));
                }
            }
            Distribution1D::Exponential { theta } => {
                if !(theta.is_finite() && *theta > 0.0) {
                    return Err(Error::InvalidDistribution(format!(
                        "exponential(theta = {theta})"
                    )));
                }
            }
            Distribution1D::Mixture {
                weights,
                components,
            } => {
                if weights.is_empty() || weights.len() != components.len() {
                    return Err(Error::InvalidDistribution(
                        "mixture needs one weight per component".into(),
                    ));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(Error::InvalidDistribution("negative mixture weight".into()));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidDistribution(format!(
                        "mixture weights sum to {total}"
                    )));
                }
                for c in components {
                    c.validate()?;
                }
            }
            Distribution1D::HuberCensored0(c) | Distribution1D::HuberCensored1(c) => {
                c.p0.validate()?;
                c.p1.validate()?;
            }
        }
        Ok(())
    }

    /// Natural-log density; `-inf` outside the support.
    pub fn log_density(&self, x: f64) -> f64 {
        match self {
            Distribution1D::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z - sd.ln() - LN_SQRT_2PI
            }
            Distribution1D::Exponential { theta } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    theta.ln() - theta * x
                }
            }
            Distribution1D::Mixture {
                weights,
                components,
            } => log_sum_exp(
                weights
                    .iter()
                    .zip(components)
                    .filter(|(w, _)| **w > 0.0)
                    .map(|(w, c)| w.ln() + c.log_density(x)),
            ),
            Distribution1D::HuberCensored0(c) | Distribution1D::HuberCensored1(c) => {
                c.log_density(x)
            }
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match self {
            Distribution1D::Gaussian { mean, sd } => {
                0.5 * erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2))
            }
            Distribution1D::Exponential { theta } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-theta * x).exp_m1()
                }
            }
            Distribution1D::Mixture {
                weights,
                components,
            } => weights
                .iter()
                .zip(components)
                .map(|(w, c)| w * c.cdf(x))
                .sum::<f64>()
                .clamp(0.0, 1.0),
            Distribution1D::HuberCensored0(c) | Distribution1D::HuberCensored1(c) => c.cdf(x),
        }
    }

    /// Smallest `x` with `cdf(x) >= u`, by bisection.
    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return self.support().0;
        }
        if u >= 1.0 {
            return self.support().1;
        }
        if let Distribution1D::Exponential { theta } = self {
            return -(-u).ln_1p() / theta;
        }
        let (mut lo, mut hi) = self.bulk_range();
        let (sup_lo, sup_hi) = self.support();
        while self.cdf(lo) > u && lo > sup_lo {
            lo = (lo - (hi - lo)).max(sup_lo);
        }
        while self.cdf(hi) < u && hi < sup_hi {
            hi += hi - lo;
        }
        bisect(
            |x| self.cdf(x) - u,
            lo,
            hi,
            1e-12 * (1.0 + lo.abs().max(hi.abs())),
        )
        .unwrap_or(0.5 * (lo + hi))
    }

    /// Closed support interval (endpoints may be infinite).
    pub fn support(&self) -> (f64, f64) {
        match self {
            Distribution1D::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Distribution1D::Exponential { .. } => (0.0, f64::INFINITY),
            Distribution1D::Mixture {
                weights,
                components,
            } => weights
                .iter()
                .zip(components)
                .filter(|(w, _)| **w > 0.0)
                .map(|(_, c)| c.support())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (c, d)| {
                    (a.min(c), b.max(d))
                }),
            Distribution1D::HuberCensored0(c) | Distribution1D::HuberCensored1(c) => {
                let (a, b) = c.p0.support();
                let (x, y) = c.p1.support();
                (a.min(x), b.max(y))
            }
        }
    }

    /// A finite interval holding all but a negligible fraction of the mass,
    /// used to seed searches.
    pub fn bulk_range(&self) -> (f64, f64) {
        match self {
            Distribution1D::Gaussian { mean, sd } => (mean - 10.0 * sd, mean + 10.0 * sd),
            Distribution1D::Exponential { theta } => (0.0, 35.0 / theta),
            Distribution1D::Mixture { components, .. } => components
                .iter()
                .map(|c| c.bulk_range())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (c, d)| {
                    (a.min(c), b.max(d))
                }),
            Distribution1D::HuberCensored0(c) | Distribution1D::HuberCensored1(c) => {
                common_range(&c.p0, &c.p1)
            }
        }
    }

    /// Points where the density is non-smooth or the mass is concentrated;
    /// passed to the integrator as break points.
    pub fn break_points(&self) -> Vec<f64> {
        match self {
            Distribution1D::Gaussian { mean, .. } => vec![*mean],
            Distribution1D::Exponential { .. } => vec![0.0],
            Distribution1D::Mixture { components, .. } => {
                components.iter().flat_map(|c| c.break_points()).collect()
            }
            Distribution1D::HuberCensored0(c) | Distribution1D::HuberCensored1(c) => {
                let mut v = c.p0.break_points();
                v.extend(c.p1.break_points());
                if c.boundary.is_finite() {
                    v.push(c.boundary);
                }
                v
            }
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match self {
            Distribution1D::Gaussian { mean, .. } => Some(*mean),
            Distribution1D::Exponential { theta } => Some(1.0 / theta),
            Distribution1D::Mixture {
                weights,
                components,
            } => weights
                .iter()
                .zip(components)
                .map(|(w, c)| c.mean().map(|m| w * m))
                .sum(),
            _ => None,
        }
    }

    /// Checks that every table needed for sampling has been built.
    pub fn sampler(&self) -> Result<Sampler<'_>> {
        fn ready(d: &Distribution1D) -> bool {
            match d {
                Distribution1D::HuberCensored0(c) | Distribution1D::HuberCensored1(c) => {
                    c.table.is_some()
                }
                Distribution1D::Mixture { components, .. } => components.iter().all(ready),
                _ => true,
            }
        }
        self.validate()?;
        if ready(self) {
            Ok(Sampler { dist: self })
        } else {
            Err(Error::TableNotInitialized)
        }
    }

    /// `n` i.i.d. draws, deterministic in `seed`.
    pub fn sample(&self, seed: Seed, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "sample size must be at least 1".into(),
            ));
        }
        let sampler = self.sampler()?;
        let mut rng = seed.rng();
        Ok((0..n).map(|_| sampler.draw(&mut rng)).collect())
    }

    /// Integral of the density over the support.
    pub fn total_mass(&self, tol: f64) -> Result<f64> {
        let (lo, hi) = self.support();
        let mut pts = self.break_points();
        pts.push(lo);
        pts.push(hi);
        pts.retain(|x| *x >= lo && *x <= hi);
        integrate_pieces(|x| self.density(x), &pts, tol)
    }
}

/// A validated handle for drawing from a [`Distribution1D`].
#[derive(Debug, Clone, Copy)]
pub struct Sampler<'a> {
    dist: &'a Distribution1D,
}

impl Sampler<'_> {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        draw(self.dist, rng)
    }
}

fn draw<R: Rng + ?Sized>(d: &Distribution1D, rng: &mut R) -> f64 {
    match d {
        Distribution1D::Gaussian { mean, sd } => {
            let z: f64 = rng.sample(StandardNormal);
            mean + sd * z
        }
        Distribution1D::Exponential { theta } => {
            let e: f64 = rng.sample(Exp1);
            e / theta
        }
        Distribution1D::Mixture {
            weights,
            components,
        } => {
            let mut u: f64 = rng.random();
            let last = components.len() - 1;
            for (i, (w, c)) in weights.iter().zip(components).enumerate() {
                if u < *w || i == last {
                    return draw(c, rng);
                }
                u -= w;
            }
            unreachable!("mixture has at least one component")
        }
        Distribution1D::HuberCensored0(c) | Distribution1D::HuberCensored1(c) => {
            let table = c.table.as_ref().expect("sampler() checked the table");
            table.invert(rng.random())
        }
    }
}

pub fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log(exp(a) + exp(b))` without overflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Kullback–Leibler divergence `D(p || q)` in nats.
pub fn kl_divergence(p: &Distribution1D, q: &Distribution1D) -> Result<f64> {
    use Distribution1D::*;
    match (p, q) {
        (Gaussian { mean: m1, sd: s1 }, Gaussian { mean: m2, sd: s2 }) => {
            let d = m1 - m2;
            Ok((s2 / s1).ln() + (s1 * s1 + d * d) / (2.0 * s2 * s2) - 0.5)
        }
        (Exponential { theta: t1 }, Exponential { theta: t2 }) => {
            Ok((t1 / t2).ln() + t2 / t1 - 1.0)
        }
        _ => {
            if p == q {
                return Ok(0.0);
            }
            let (plo, phi) = p.support();
            let (qlo, qhi) = q.support();
            if plo < qlo || phi > qhi {
                return Err(Error::InfiniteDivergence);
            }
            let infinite = Cell::new(false);
            let mut pts = p.break_points();
            pts.extend(q.break_points());
            pts.push(plo);
            pts.push(phi);
            pts.retain(|x| *x >= plo && *x <= phi);
            let v = integrate_pieces(
                |x| {
                    let lp = p.log_density(x);
                    if lp == f64::NEG_INFINITY {
                        return 0.0;
                    }
                    let lq = q.log_density(x);
                    if lq == f64::NEG_INFINITY {
                        infinite.set(true);
                        return 0.0;
                    }
                    lp.exp() * (lp - lq)
                },
                &pts,
                KL_TOL,
            )?;
            if infinite.get() {
                return Err(Error::InfiniteDivergence);
            }
            Ok(v.max(0.0))
        }
    }
}
