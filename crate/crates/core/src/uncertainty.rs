//! Uncertainty classes and their least favorable distributions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{lr_crossing, Distribution1D};
use crate::error::{Error, Result};
use crate::quadrature::{bisect, integrate_pieces};
use crate::seed::Seed;

/// Absolute tolerance of the integrals inside the censoring-threshold solver.
pub const HUBER_QUAD_TOL: f64 = 1e-10;
/// Bisection tolerance on each censoring threshold.
pub const HUBER_ROOT_TOL: f64 = 1e-12;
/// Bisection tolerance for the degeneracy limit of ε.
pub const DEGENERACY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum UncertaintyClass {
    Singleton {
        dist: Distribution1D,
    },
    /// `{ N(θ, sd²) : lo <= θ <= hi }`.
    GaussianMeanBand {
        lo: f64,
        hi: f64,
        sd: f64,
    },
    /// `{ Exp(θ) : θ >= theta_min }`, rate parameterization.
    ExpRateRay {
        theta_min: f64,
    },
    /// `{ (1 - eps) nominal + eps H : H arbitrary }`.
    EpsContamination {
        nominal: Distribution1D,
        eps: f64,
    },
}

impl UncertaintyClass {
    pub fn validate(&self) -> Result<()> {
        match self {
            UncertaintyClass::Singleton { dist } => dist.validate(),
            UncertaintyClass::GaussianMeanBand { lo, hi, sd } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::InvalidClass(format!(
                        "mean band [{lo}, {hi}] needs lo < hi"
                    )));
                }
                if !(sd.is_finite() && *sd > 0.0) {
                    return Err(Error::InvalidClass(format!("mean band sd = {sd}")));
                }
                Ok(())
            }
            UncertaintyClass::ExpRateRay { theta_min } => {
                if theta_min.is_finite() && *theta_min > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidClass(format!(
                        "rate ray theta_min = {theta_min}"
                    )))
                }
            }
            UncertaintyClass::EpsContamination { nominal, eps } => {
                nominal.validate()?;
                if (0.0..1.0).contains(eps) {
                    Ok(())
                } else {
                    Err(Error::InvalidClass(format!("eps = {eps} outside [0, 1)")))
                }
            }
        }
    }

    /// Whether `d` is (syntactically) a member of the class. Contaminated
    /// members must be written as a two-component mixture whose first
    /// component is the nominal law with weight `1 - eps`.
    pub fn contains(&self, d: &Distribution1D) -> bool {
        match (self, d) {
            (UncertaintyClass::Singleton { dist }, d) => dist == d,
            (
                UncertaintyClass::GaussianMeanBand { lo, hi, sd },
                Distribution1D::Gaussian { mean, sd: s },
            ) => s == sd && *mean >= *lo && *mean <= *hi,
            (UncertaintyClass::ExpRateRay { theta_min }, Distribution1D::Exponential { theta }) => {
                theta >= theta_min
            }
            (UncertaintyClass::EpsContamination { nominal, eps }, d) => {
                if *eps == 0.0 && d == nominal {
                    return true;
                }
                match d {
                    Distribution1D::Mixture {
                        weights,
                        components,
                    } => {
                        weights.len() == 2
                            && components[0] == *nominal
                            && (weights[0] - (1.0 - eps)).abs() <= 1e-12
                    }
                    _ => false,
                }
            }
            _ => false,
        }
    }

    /// Member of an ε-contamination class with contaminant `h`.
    pub fn contaminated_member(&self, h: Distribution1D) -> Result<Distribution1D> {
        match self {
            UncertaintyClass::EpsContamination { nominal, eps } => {
                Distribution1D::contaminated(nominal.clone(), *eps, h)
            }
            _ => Err(Error::InvalidClass("not an ε-contamination class".into())),
        }
    }
}

/// A log-likelihood ratio `x ↦ log dν1/dν0 (x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Llr {
    Affine {
        slope: f64,
        intercept: f64,
    },
    Clamped {
        inner: Box<Llr>,
        lo: f64,
        hi: f64,
    },
    Densities {
        nu0: Distribution1D,
        nu1: Distribution1D,
    },
}

impl Llr {
    /// The log-likelihood ratio between two laws, in closed form when one
    /// exists.
    pub fn between(nu0: &Distribution1D, nu1: &Distribution1D) -> Llr {
        match (nu0, nu1) {
            (
                Distribution1D::Gaussian { mean: m0, sd: s0 },
                Distribution1D::Gaussian { mean: m1, sd: s1 },
            ) if s0 == s1 => {
                let v = s0 * s0;
                Llr::Affine {
                    slope: (m1 - m0) / v,
                    intercept: -(m1 * m1 - m0 * m0) / (2.0 * v),
                }
            }
            (
                Distribution1D::Exponential { theta: t0 },
                Distribution1D::Exponential { theta: t1 },
            ) => Llr::Affine {
                slope: -(t1 - t0),
                intercept: (t1 / t0).ln(),
            },
            _ => Llr::Densities {
                nu0: nu0.clone(),
                nu1: nu1.clone(),
            },
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Llr::Affine { slope, intercept } => slope * x + intercept,
            Llr::Clamped { inner, lo, hi } => inner.eval(x).clamp(*lo, *hi),
            Llr::Densities { nu0, nu1 } => nu1.log_density(x) - nu0.log_density(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfdPair {
    pub nu0_bar: Distribution1D,
    pub nu1_under: Distribution1D,
    pub llr: Llr,
}

impl LfdPair {
    pub fn new(nu0_bar: Distribution1D, nu1_under: Distribution1D) -> Self {
        let llr = Llr::between(&nu0_bar, &nu1_under);
        LfdPair {
            nu0_bar,
            nu1_under,
            llr,
        }
    }
}

/// Censoring thresholds with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HuberSolution {
    pub a: f64,
    pub b: f64,
    /// `|lhs - 1|` of the `a` and `b` equations.
    pub residual_a: f64,
    pub residual_b: f64,
    /// Largest ε for which `a < b`.
    pub degeneracy_limit: f64,
}

/// Masses of `p0` on `{L <= t}` and of `p1` on `{L > t}` for the nominal
/// likelihood ratio `L = p1 / p0`.
struct RegionMasses<'a> {
    p0: &'a Distribution1D,
    p1: &'a Distribution1D,
    lo: f64,
    hi: f64,
    breaks: Vec<f64>,
}

impl<'a> RegionMasses<'a> {
    fn new(p0: &'a Distribution1D, p1: &'a Distribution1D) -> Result<Self> {
        let (a0, b0) = p0.support();
        let (a1, b1) = p1.support();
        if a0 != a1 || b0 != b1 {
            return Err(Error::UnsupportedClassPair(
                "nominal laws must share a support".into(),
            ));
        }
        // Fails early on non-monotone ratios.
        lr_crossing(p0, p1, 0.0)?;
        let mut breaks = p0.break_points();
        breaks.extend(p1.break_points());
        Ok(RegionMasses {
            p0,
            p1,
            lo: a0,
            hi: b0,
            breaks,
        })
    }

    fn mass(&self, d: &Distribution1D, from: f64, to: f64) -> Result<f64> {
        if from >= to {
            return Ok(0.0);
        }
        let mut pts: Vec<f64> = self
            .breaks
            .iter()
            .copied()
            .filter(|x| *x > from && *x < to)
            .collect();
        pts.push(from);
        pts.push(to);
        integrate_pieces(|x| d.density(x), &pts, HUBER_QUAD_TOL)
    }

    /// `(P0(L <= t), P1(L > t))`.
    fn split(&self, t: f64) -> Result<(f64, f64)> {
        let (c, increasing) = lr_crossing(self.p0, self.p1, t.ln())?;
        let c = c.clamp(self.lo, self.hi);
        if increasing {
            Ok((
                self.mass(self.p0, self.lo, c)?,
                self.mass(self.p1, c, self.hi)?,
            ))
        } else {
            Ok((
                self.mass(self.p0, c, self.hi)?,
                self.mass(self.p1, self.lo, c)?,
            ))
        }
    }

    /// Left-hand side of the equation fixing `b`.
    fn lhs_b(&self, eps: f64, b: f64) -> Result<f64> {
        let (m0, m1) = self.split(b)?;
        Ok((1.0 - eps) * m0 + (1.0 - eps) / b * m1)
    }

    /// Left-hand side of the equation fixing `a`.
    fn lhs_a(&self, eps: f64, a: f64) -> Result<f64> {
        let (m0, m1) = self.split(a)?;
        Ok((1.0 - eps) * m1 + a * (1.0 - eps) * m0)
    }

    /// Both equations evaluated at threshold 1 share the value
    /// `(1 - ε)(P0(L <= 1) + P1(L > 1))`; `a < b` holds iff it exceeds 1.
    fn separation(&self) -> Result<f64> {
        let (m0, m1) = self.split(1.0)?;
        Ok(m0 + m1)
    }
}

/// Largest ε for which the censoring thresholds satisfy `a < b`.
pub fn degeneracy_limit(p0: &Distribution1D, p1: &Distribution1D) -> Result<f64> {
    let masses = RegionMasses::new(p0, p1)?;
    let s = masses.separation()?;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if s <= 1.0 {
        return Ok(0.0);
    }
    while hi - lo > DEGENERACY_TOL {
        let mid = 0.5 * (lo + hi);
        if (1.0 - mid) * s > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Censoring thresholds `(a, b)` of the least favorable pair for two
/// ε-contamination neighborhoods of `p0` and `p1`.
pub fn huber_thresholds(p0: &Distribution1D, p1: &Distribution1D, eps: f64) -> Result<(f64, f64)> {
    huber_solve(p0, p1, eps).map(|s| (s.a, s.b))
}

/// [`huber_thresholds`] together with residuals and the degeneracy limit.
pub fn huber_solve(p0: &Distribution1D, p1: &Distribution1D, eps: f64) -> Result<HuberSolution> {
    p0.validate()?;
    p1.validate()?;
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidClass(format!("eps = {eps} outside [0, 1)")));
    }
    let masses = RegionMasses::new(p0, p1)?;
    let limit = degeneracy_limit(p0, p1)?;
    if eps == 0.0 {
        return Ok(HuberSolution {
            a: 0.0,
            b: f64::INFINITY,
            residual_a: 0.0,
            residual_b: 0.0,
            degeneracy_limit: limit,
        });
    }
    let s = masses.separation()?;
    if (1.0 - eps) * s <= 1.0 {
        return Err(Error::DegenerateClasses { eps, limit });
    }

    // lhs_b decreases in b from lhs_b(1) > 1; find an upper bracket.
    let mut b_hi = 2.0;
    while masses.lhs_b(eps, b_hi)? >= 1.0 {
        b_hi *= 2.0;
        if b_hi > 1e300 {
            return Err(Error::NotBracketed { lo: 1.0, hi: b_hi });
        }
    }
    let mut failure = None;
    let mut eval = |f: Result<f64>| match f {
        Ok(v) => v,
        Err(e) => {
            failure = Some(e);
            f64::NAN
        }
    };
    let b = bisect(
        |b| eval(masses.lhs_b(eps, b)) - 1.0,
        1.0,
        b_hi,
        HUBER_ROOT_TOL,
    )?;
    let a = bisect(
        |a| eval(masses.lhs_a(eps, a)) - 1.0,
        0.0,
        1.0,
        HUBER_ROOT_TOL,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(HuberSolution {
        a,
        b,
        residual_a: (masses.lhs_a(eps, a)? - 1.0).abs(),
        residual_b: (masses.lhs_b(eps, b)? - 1.0).abs(),
        degeneracy_limit: limit,
    })
}

/// Least favorable pair for a supported pair of classes.
pub fn solve_lfd(p0: &UncertaintyClass, p1: &UncertaintyClass) -> Result<LfdPair> {
    use UncertaintyClass::*;
    p0.validate()?;
    p1.validate()?;
    match (p0, p1) {
        (
            Singleton {
                dist: Distribution1D::Gaussian { mean, sd },
            },
            GaussianMeanBand {
                lo,
                hi,
                sd: band_sd,
            },
        ) => {
            if sd != band_sd {
                return Err(Error::UnsupportedClassPair(
                    "singleton and band must share sd".into(),
                ));
            }
            let m1 = if mean < lo {
                *lo
            } else if mean > hi {
                *hi
            } else {
                return Err(Error::UnsupportedClassPair(
                    "pre-change mean lies inside the post-change band".into(),
                ));
            };
            Ok(LfdPair::new(
                Distribution1D::gaussian(*mean, *sd),
                Distribution1D::gaussian(m1, *sd),
            ))
        }
        (
            Singleton {
                dist: Distribution1D::Exponential { theta },
            },
            ExpRateRay { theta_min },
        ) => {
            if theta_min <= theta {
                return Err(Error::UnsupportedClassPair(
                    "rate ray must lie above the pre-change rate".into(),
                ));
            }
            Ok(LfdPair::new(
                Distribution1D::exponential(*theta),
                Distribution1D::exponential(*theta_min),
            ))
        }
        (
            GaussianMeanBand {
                lo: l0,
                hi: h0,
                sd: s0,
            },
            GaussianMeanBand {
                lo: l1,
                hi: h1,
                sd: s1,
            },
        ) => {
            if s0 != s1 {
                return Err(Error::UnsupportedClassPair("bands must share sd".into()));
            }
            if h0 < l1 {
                Ok(LfdPair::new(
                    Distribution1D::gaussian(*h0, *s0),
                    Distribution1D::gaussian(*l1, *s0),
                ))
            } else if h1 < l0 {
                Ok(LfdPair::new(
                    Distribution1D::gaussian(*l0, *s0),
                    Distribution1D::gaussian(*h1, *s0),
                ))
            } else {
                Err(Error::UnsupportedClassPair("mean bands overlap".into()))
            }
        }
        (
            EpsContamination {
                nominal: n0,
                eps: e0,
            },
            EpsContamination {
                nominal: n1,
                eps: e1,
            },
        ) => {
            if e0 != e1 {
                return Err(Error::UnsupportedClassPair(
                    "contamination levels must be equal".into(),
                ));
            }
            if *e0 == 0.0 {
                return Ok(LfdPair::new(n0.clone(), n1.clone()));
            }
            let (a, b) = huber_thresholds(n0, n1, *e0)?;
            let nu0_bar = Distribution1D::huber_censored0(n0.clone(), n1.clone(), *e0, b)?
                .with_sampling_table()?;
            let nu1_under = Distribution1D::huber_censored1(n0.clone(), n1.clone(), *e0, a)?
                .with_sampling_table()?;
            Ok(LfdPair {
                nu0_bar,
                nu1_under,
                llr: Llr::Clamped {
                    inner: Box::new(Llr::between(n0, n1)),
                    lo: a.ln(),
                    hi: b.ln(),
                },
            })
        }
        _ => Err(Error::UnsupportedClassPair(format!(
            "{} / {}",
            class_name(p0),
            class_name(p1)
        ))),
    }
}

fn class_name(c: &UncertaintyClass) -> &'static str {
    match c {
        UncertaintyClass::Singleton { .. } => "singleton",
        UncertaintyClass::GaussianMeanBand { .. } => "gaussian_mean_band",
        UncertaintyClass::ExpRateRay { .. } => "exp_rate_ray",
        UncertaintyClass::EpsContamination { .. } => "eps_contamination",
    }
}

/// Empirical CDF over a sorted sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut sample: Vec<f64>) -> Result<Self> {
        if sample.is_empty() || sample.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidArgument(
                "empirical CDF needs a non-empty sample without NaN".into(),
            ));
        }
        sample.sort_by(f64::total_cmp);
        Ok(EmpiricalCdf { sorted: sample })
    }

    pub fn cdf(&self, t: f64) -> f64 {
        self.sorted.partition_point(|&x| x <= t) as f64 / self.sorted.len() as f64
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.sorted.len();
        let i = ((u * n as f64).ceil() as usize).clamp(1, n) - 1;
        self.sorted[i]
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }
}

/// Something with a CDF.
#[derive(Debug, Clone, PartialEq)]
pub enum CdfSource {
    Analytic(Distribution1D),
    Empirical(EmpiricalCdf),
}

impl CdfSource {
    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            CdfSource::Analytic(d) => d.cdf(t),
            CdfSource::Empirical(e) => e.cdf(t),
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            CdfSource::Analytic(d) => d.quantile(u),
            CdfSource::Empirical(e) => e.quantile(u),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dominance {
    pub dominates: bool,
    /// `min_t CDF_B(t) - CDF_A(t)` over the grid.
    pub margin: f64,
}

const DOMINANCE_GRID: usize = 2048;
const DOMINANCE_REFINE: usize = 256;

/// Whether `a` is stochastically larger than `b`: `CDF_a(t) <= CDF_b(t) + tolerance`
/// for every `t` on a grid spanning the pooled 0.0001–0.9999 quantile range,
/// refined around the closest approach.
pub fn dominates(a: &CdfSource, b: &CdfSource, tolerance: f64) -> Dominance {
    let lo = a.quantile(1e-4).min(b.quantile(1e-4));
    let hi = a.quantile(1.0 - 1e-4).max(b.quantile(1.0 - 1e-4));
    let gap = |t: f64| b.cdf(t) - a.cdf(t);
    let mut margin = f64::INFINITY;
    if !(hi > lo) {
        margin = gap(lo);
    } else {
        let step = (hi - lo) / (DOMINANCE_GRID - 1) as f64;
        let mut worst = 0;
        for i in 0..DOMINANCE_GRID {
            let g = gap(lo + step * i as f64);
            if g < margin {
                margin = g;
                worst = i;
            }
        }
        let center = lo + step * worst as f64;
        for j in 0..=DOMINANCE_REFINE {
            let t = center - step + 2.0 * step * j as f64 / DOMINANCE_REFINE as f64;
            margin = margin.min(gap(t));
        }
    }
    Dominance {
        dominates: margin >= -tolerance,
        margin,
    }
}

/// Which side of the class pair a probe belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeSide {
    Pre,
    Post,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberMargin {
    pub member: String,
    pub side: ProbeSide,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsbReport {
    pub pass: bool,
    pub margins: Vec<MemberMargin>,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JsbOptions {
    /// Draws per empirical LLR law.
    pub samples: usize,
    pub tolerance: f64,
    pub seed: Seed,
}

impl Default for JsbOptions {
    fn default() -> Self {
        JsbOptions {
            samples: 100_000,
            tolerance: 0.01,
            seed: Seed::default(),
        }
    }
}

/// Law of `llr(X)` for `X ~ d`: exact for affine LLRs of Gaussians,
/// empirical otherwise.
pub fn llr_law(llr: &Llr, d: &Distribution1D, samples: usize, seed: Seed) -> Result<CdfSource> {
    if let (Llr::Affine { slope, intercept }, Distribution1D::Gaussian { mean, sd }) = (llr, d) {
        if *slope != 0.0 {
            return Ok(CdfSource::Analytic(Distribution1D::gaussian(
                slope * mean + intercept,
                slope.abs() * sd,
            )));
        }
    }
    let xs = d.sample(seed, samples)?;
    EmpiricalCdf::new(xs.into_iter().map(|x| llr.eval(x)).collect()).map(CdfSource::Empirical)
}

/// Numerical evidence that `(p0, p1)` is jointly stochastically bounded by
/// `lfd`: for each pre-change probe, `L*(X)` under `nu0_bar` must dominate
/// `L*(X)` under the probe; for each post-change probe, the probe's law of
/// `L*(X)` must dominate the one under `nu1_under`.
pub fn check_jsb(
    p0: &UncertaintyClass,
    p1: &UncertaintyClass,
    lfd: &LfdPair,
    probes: &[Distribution1D],
    opts: &JsbOptions,
) -> JsbReport {
    let margins: Vec<MemberMargin> = probes
        .par_iter()
        .enumerate()
        .map(|(i, probe)| {
            let side = if p0.contains(probe) {
                ProbeSide::Pre
            } else if p1.contains(probe) {
                ProbeSide::Post
            } else {
                ProbeSide::Neither
            };
            let member = format!("{}#{i}", side_label(side));
            let seed = opts.seed.derive(&member);
            let margin = match side {
                ProbeSide::Neither => f64::NEG_INFINITY,
                ProbeSide::Pre => pair_margin(lfd, &lfd.nu0_bar, probe, opts, seed),
                ProbeSide::Post => pair_margin(lfd, probe, &lfd.nu1_under, opts, seed),
            };
            MemberMargin {
                member,
                side,
                margin,
            }
        })
        .collect();
    let pass = margins.iter().all(|m| m.margin >= -opts.tolerance);
    JsbReport {
        pass,
        margins,
        tolerance: opts.tolerance,
    }
}

fn side_label(side: ProbeSide) -> &'static str {
    match side {
        ProbeSide::Pre => "pre",
        ProbeSide::Post => "post",
        ProbeSide::Neither => "none",
    }
}

fn pair_margin(
    lfd: &LfdPair,
    larger: &Distribution1D,
    smaller: &Distribution1D,
    opts: &JsbOptions,
    seed: Seed,
) -> f64 {
    let a = llr_law(&lfd.llr, larger, opts.samples, seed.derive("larger"));
    let b = llr_law(&lfd.llr, smaller, opts.samples, seed.derive("smaller"));
    match (a, b) {
        (Ok(a), Ok(b)) => dominates(&a, &b, opts.tolerance).margin,
        _ => f64::NEG_INFINITY,
    }
}

/// `max_{1 <= k <= n <= N} sum_{i=k}^{n} x_i`: the largest CUSUM statistic
/// reached along the path. Non-decreasing in every coordinate.
pub fn path_max(xs: &[f64]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let mut s = 0.0f64;
    for &x in xs {
        s = s.max(0.0) + x;
        best = best.max(s);
    }
    best
}

/// Empirical check that `h(U) ≻ h(V)` for the path maximum `h` over `len`
/// i.i.d. coordinates, where each `U_i ~ u` and `V_i ~ v`.
pub fn path_max_dominance(
    u: &Distribution1D,
    v: &Distribution1D,
    len: usize,
    samples: usize,
    tolerance: f64,
    seed: Seed,
) -> Result<Dominance> {
    let draw = |d: &Distribution1D, label: &str| -> Result<EmpiricalCdf> {
        let xs = d.sample(seed.derive(label), len * samples)?;
        EmpiricalCdf::new(xs.chunks(len).map(path_max).collect())
    };
    let hu = draw(u, "u")?;
    let hv = draw(v, "v")?;
    Ok(dominates(
        &CdfSource::Empirical(hu),
        &CdfSource::Empirical(hv),
        tolerance,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(m: f64, s: f64) -> Distribution1D {
        Distribution1D::gaussian(m, s)
    }

    #[test]
    fn gaussian_band_lfd() {
        let p0 = UncertaintyClass::Singleton { dist: n(0.0, 1.0) };
        let p1 = UncertaintyClass::GaussianMeanBand {
            lo: 0.1,
            hi: 3.0,
            sd: 1.0,
        };
        let lfd = solve_lfd(&p0, &p1).unwrap();
        assert_eq!(lfd.nu0_bar, n(0.0, 1.0));
        assert_eq!(lfd.nu1_under, n(0.1, 1.0));
        match lfd.llr {
            Llr::Affine { slope, intercept } => {
                assert!((slope - 0.1).abs() < 1e-15);
                assert!((intercept + 0.005).abs() < 1e-15);
            }
            other => panic!("unexpected llr {other:?}"),
        }
    }

    #[test]
    fn exponential_ray_lfd() {
        let p0 = UncertaintyClass::Singleton {
            dist: Distribution1D::exponential(1.0),
        };
        let p1 = UncertaintyClass::ExpRateRay { theta_min: 2.0 };
        let lfd = solve_lfd(&p0, &p1).unwrap();
        assert_eq!(lfd.nu0_bar, Distribution1D::exponential(1.0));
        assert_eq!(lfd.nu1_under, Distribution1D::exponential(2.0));
        for x in [0.0, 0.3, 2.0, 7.5] {
            let direct = lfd.nu1_under.log_density(x) - lfd.nu0_bar.log_density(x);
            assert!((lfd.llr.eval(x) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn disjoint_bands_and_unsupported_pairs() {
        let a = UncertaintyClass::GaussianMeanBand {
            lo: -1.0,
            hi: 0.0,
            sd: 1.0,
        };
        let b = UncertaintyClass::GaussianMeanBand {
            lo: 0.5,
            hi: 2.0,
            sd: 1.0,
        };
        let lfd = solve_lfd(&a, &b).unwrap();
        assert_eq!(lfd.nu0_bar, n(0.0, 1.0));
        assert_eq!(lfd.nu1_under, n(0.5, 1.0));
        let overlap = UncertaintyClass::GaussianMeanBand {
            lo: -0.5,
            hi: 1.0,
            sd: 1.0,
        };
        assert!(matches!(
            solve_lfd(&overlap, &b),
            Err(Error::UnsupportedClassPair(_))
        ));
        let ray = UncertaintyClass::ExpRateRay { theta_min: 2.0 };
        assert!(matches!(
            solve_lfd(&a, &ray),
            Err(Error::UnsupportedClassPair(_))
        ));
    }

    #[test]
    fn class_validation() {
        assert!(UncertaintyClass::GaussianMeanBand {
            lo: 1.0,
            hi: 1.0,
            sd: 1.0
        }
        .validate()
        .is_err());
        assert!(UncertaintyClass::EpsContamination {
            nominal: n(0.0, 1.0),
            eps: 1.0
        }
        .validate()
        .is_err());
        assert!(UncertaintyClass::ExpRateRay { theta_min: 0.0 }
            .validate()
            .is_err());
    }

    #[test]
    fn zero_eps_means_no_censoring() {
        let (a, b) = huber_thresholds(&n(0.0, 1.0), &n(1.0, 1.0), 0.0).unwrap();
        assert_eq!(a, 0.0);
        assert_eq!(b, f64::INFINITY);
        let c0 = UncertaintyClass::EpsContamination {
            nominal: n(0.0, 1.0),
            eps: 0.0,
        };
        let c1 = UncertaintyClass::EpsContamination {
            nominal: n(1.0, 1.0),
            eps: 0.0,
        };
        let lfd = solve_lfd(&c0, &c1).unwrap();
        assert_eq!(lfd.nu0_bar, n(0.0, 1.0));
    }

    #[test]
    fn huber_residuals_and_ordering() {
        let s = huber_solve(&n(0.0, 1.0), &n(1.0, 1.0), 0.05).unwrap();
        assert!(s.residual_a < 1e-8 && s.residual_b < 1e-8, "{s:?}");
        assert!(0.0 < s.a && s.a < 1.0 && 1.0 < s.b, "{s:?}");
    }

    #[test]
    fn huber_degenerate_for_large_eps() {
        let r = huber_thresholds(&n(0.0, 1.0), &n(1.0, 1.0), 0.9);
        assert!(matches!(r, Err(Error::DegenerateClasses { .. })), "{r:?}");
    }

    #[test]
    fn degeneracy_limit_matches_closed_form() {
        // For N(0,1) vs N(1,1) the separation is 2 Φ(1/2).
        let phi = n(0.0, 1.0).cdf(0.5);
        let expected = 1.0 - 1.0 / (2.0 * phi);
        let limit = degeneracy_limit(&n(0.0, 1.0), &n(1.0, 1.0)).unwrap();
        assert!((limit - expected).abs() < 2e-6, "{limit} vs {expected}");
    }

    #[test]
    fn non_monotone_ratio_rejected() {
        let r = huber_thresholds(&n(0.0, 1.0), &n(0.0, 2.0), 0.05);
        assert_eq!(r, Err(Error::NonMonotoneLR));
    }

    #[test]
    fn censored_llr_is_clamped_nominal_ratio() {
        let c0 = UncertaintyClass::EpsContamination {
            nominal: n(0.0, 1.0),
            eps: 0.05,
        };
        let c1 = UncertaintyClass::EpsContamination {
            nominal: n(1.0, 1.0),
            eps: 0.05,
        };
        let lfd = solve_lfd(&c0, &c1).unwrap();
        let (a, b) = huber_thresholds(&n(0.0, 1.0), &n(1.0, 1.0), 0.05).unwrap();
        for i in 0..=400 {
            let x = -8.0 + 16.0 * i as f64 / 400.0;
            // Density quotient.
            let quotient = lfd.nu1_under.log_density(x) - lfd.nu0_bar.log_density(x);
            assert!((lfd.llr.eval(x) - quotient).abs() < 1e-10, "x = {x}");
            assert!(lfd.llr.eval(x) >= a.ln() - 1e-15 && lfd.llr.eval(x) <= b.ln() + 1e-15);
            let nominal = x - 0.5;
            if nominal > a.ln() && nominal < b.ln() {
                assert!((lfd.llr.eval(x) - nominal).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dominance_examples() {
        let n0 = CdfSource::Analytic(n(0.0, 1.0));
        let n1 = CdfSource::Analytic(n(1.0, 1.0));
        let wide = CdfSource::Analytic(n(0.0, 2.0));
        let d = dominates(&n1, &n0, 1e-9);
        assert!(d.dominates && d.margin > 0.0);
        let same = dominates(&n0, &n0, 1e-9);
        assert!(same.dominates && same.margin.abs() < 1e-12);
        assert!(!dominates(&wide, &n0, 1e-3).dominates);
    }

    #[test]
    fn empirical_cdf_basics() {
        let e = EmpiricalCdf::new(vec![3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(e.cdf(0.5), 0.0);
        assert_eq!(e.cdf(2.0), 0.75);
        assert_eq!(e.cdf(3.0), 1.0);
        assert_eq!(e.quantile(0.5), 2.0);
        assert!(EmpiricalCdf::new(vec![]).is_err());
    }

    #[test]
    fn jsb_gaussian_band_passes() {
        let p0 = UncertaintyClass::Singleton { dist: n(0.0, 1.0) };
        let p1 = UncertaintyClass::GaussianMeanBand {
            lo: 0.1,
            hi: 3.0,
            sd: 1.0,
        };
        let lfd = solve_lfd(&p0, &p1).unwrap();
        let mut probes = vec![n(0.0, 1.0)];
        probes.extend([0.1, 0.2, 0.5, 1.0, 2.0, 3.0].iter().map(|&t| n(t, 1.0)));
        let report = check_jsb(&p0, &p1, &lfd, &probes, &JsbOptions::default());
        assert!(report.pass, "{report:?}");
        assert_eq!(report.margins[0].side, ProbeSide::Pre);
        assert!(report.margins[1..]
            .iter()
            .all(|m| m.side == ProbeSide::Post));
    }

    #[test]
    fn jsb_wrong_pair_fails() {
        let p0 = UncertaintyClass::Singleton { dist: n(0.0, 1.0) };
        let p1 = UncertaintyClass::GaussianMeanBand {
            lo: 0.1,
            hi: 3.0,
            sd: 1.0,
        };
        let wrong = LfdPair::new(n(0.0, 1.0), n(1.0, 1.0));
        let report = check_jsb(&p0, &p1, &wrong, &[n(0.1, 1.0)], &JsbOptions::default());
        assert!(!report.pass);
    }

    #[test]
    fn jsb_non_member_reported() {
        let p0 = UncertaintyClass::Singleton { dist: n(0.0, 1.0) };
        let p1 = UncertaintyClass::GaussianMeanBand {
            lo: 0.1,
            hi: 3.0,
            sd: 1.0,
        };
        let lfd = solve_lfd(&p0, &p1).unwrap();
        let report = check_jsb(&p0, &p1, &lfd, &[n(5.0, 1.0)], &JsbOptions::default());
        assert!(!report.pass);
        assert_eq!(report.margins[0].side, ProbeSide::Neither);
    }

    #[test]
    fn path_max_small_cases() {
        assert_eq!(path_max(&[1.0, -2.0, 3.0]), 3.0);
        assert_eq!(path_max(&[-1.0, -0.5]), -0.5);
        assert_eq!(path_max(&[1.0, 1.0, -0.5, 2.0]), 3.5);
    }
}
