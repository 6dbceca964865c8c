//! Detection-delay estimators and the asymptotic cost-of-robustness bound.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::calibration::draw_change_point;
use crate::detectors::{run_to_alarm, DetectorFamily, DetectorSpec};
use crate::distributions::{kl_divergence, Distribution1D};
use crate::error::{Error, Result};
use crate::montecarlo::{replicate, EstimateWithError};
use crate::seed::Seed;
use crate::uncertainty::LfdPair;

/// When the observations switch from `nu0` to `nu1`: `X_n ~ nu0` for
/// `n < λ` and `X_n ~ nu1` for `n >= λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ChangeModel {
    FixedLambda { lambda: u64 },
    GeometricLambda { rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayMetric {
    /// Worst-case delay `sup_λ esssup E_λ[(τ-λ+1)^+ | F_{λ-1}]`.
    Wdd,
    /// Average delay `E[(τ-Λ)^+]` under a geometric change point.
    Add,
    /// `sup_λ E_λ[τ-λ | τ >= λ]`.
    Jsrp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPoint {
    pub lambda: u64,
    pub estimate: EstimateWithError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayEstimate {
    pub metric: DelayMetric,
    pub estimate: EstimateWithError,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_grid: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_lambda: Vec<LambdaPoint>,
}

/// Change points swept for window-limited GLR worst-case delays.
pub const GLR_WDD_GRID: [u64; 4] = [1, 10, 100, 1000];
/// Default change points for the conditional-delay criterion.
pub const JSRP_DEFAULT_GRID: [u64; 7] = [1, 2, 5, 10, 50, 100, 500];
/// Conditioned runs below which a grid point is flagged.
pub const MIN_CONDITIONED_RUNS: u64 = 100;

/// Monte Carlo effort for a delay estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayRuns {
    pub n_runs: u64,
    /// Cap on the total run length, pre-change segment included.
    pub max_len: u64,
    pub seed: Seed,
}

impl DelayRuns {
    pub fn new(n_runs: u64, seed: Seed) -> Self {
        DelayRuns {
            n_runs,
            max_len: 1_000_000,
            seed,
        }
    }
}

/// Delays `τ - λ + offset` for the runs that survive to `λ`, plus the number
/// of censored survivors.
fn conditional_delays(
    spec: &DetectorSpec,
    nu0: &Distribution1D,
    nu1: &Distribution1D,
    lambda: u64,
    offset: f64,
    runs: &DelayRuns,
) -> Result<(Vec<f64>, u64)> {
    spec.validate()?;
    let pre = nu0.sampler()?;
    let post = nu1.sampler()?;
    let seed = runs.seed.derive(&format!("lambda={lambda}"));
    let outcomes: Vec<Option<(f64, bool)>> = replicate(runs.n_runs, seed, |rng| {
        let det = spec.start(rng).expect("validated");
        let mut t = 0u64;
        let out = run_to_alarm(
            det,
            || {
                t += 1;
                if t < lambda {
                    pre.draw(rng)
                } else {
                    post.draw(rng)
                }
            },
            runs.max_len.max(lambda),
        );
        if out.tau < lambda {
            None
        } else {
            Some((out.tau as f64 - lambda as f64 + offset, out.censored))
        }
    });
    let mut delays = Vec::with_capacity(outcomes.len());
    let mut censored = 0;
    for (d, c) in outcomes.into_iter().flatten() {
        delays.push(d);
        censored += u64::from(c);
    }
    Ok((delays, censored))
}

fn estimate_at(
    spec: &DetectorSpec,
    nu0: &Distribution1D,
    nu1: &Distribution1D,
    lambda: u64,
    offset: f64,
    runs: &DelayRuns,
) -> Result<LambdaPoint> {
    let (delays, censored) = conditional_delays(spec, nu0, nu1, lambda, offset, runs)?;
    if (delays.len() as u64) < MIN_CONDITIONED_RUNS {
        warn!(
            "only {} runs survive to change point {lambda}",
            delays.len()
        );
    }
    let estimate = EstimateWithError::from_samples(&delays, censored, runs.seed);
    if estimate.censored_fraction > 0.01 {
        warn!(
            "{:.2}% of delay runs hit max_len",
            100.0 * estimate.censored_fraction
        );
    }
    Ok(LambdaPoint { lambda, estimate })
}

fn sup_over(points: Vec<LambdaPoint>, metric: DelayMetric, grid: Vec<u64>) -> DelayEstimate {
    let best = points
        .iter()
        .filter(|p| p.estimate.n_runs > 0)
        .max_by(|a, b| a.estimate.value.total_cmp(&b.estimate.value))
        .map(|p| p.estimate)
        .unwrap_or_else(|| EstimateWithError::from_samples(&[], 0, Seed::default()));
    DelayEstimate {
        metric,
        estimate: best,
        lambda_grid: Some(grid),
        per_lambda: points,
    }
}

/// Worst-case detection delay.
///
/// For CUSUM the worst pre-change history leaves the statistic at its reset
/// value 0, so a change at `λ = 1` from a fresh detector attains the
/// supremum. GLR keeps memory of the pre-change data; its delay is the
/// largest conditional delay over the change points in [`GLR_WDD_GRID`]
/// with genuine pre-change prefixes.
pub fn estimate_wdd(
    spec: &DetectorSpec,
    nu0: &Distribution1D,
    nu1: &Distribution1D,
    runs: &DelayRuns,
) -> Result<DelayEstimate> {
    match spec.family {
        DetectorFamily::Cusum => {
            let p = estimate_at(spec, nu0, nu1, 1, 1.0, runs)?;
            Ok(DelayEstimate {
                metric: DelayMetric::Wdd,
                estimate: p.estimate,
                lambda_grid: None,
                per_lambda: Vec::new(),
            })
        }
        DetectorFamily::Glr { .. } => {
            let points = GLR_WDD_GRID
                .iter()
                .map(|&l| estimate_at(spec, nu0, nu1, l, 1.0, runs))
                .collect::<Result<Vec<_>>>()?;
            Ok(sup_over(points, DelayMetric::Wdd, GLR_WDD_GRID.to_vec()))
        }
        _ => Err(Error::InvalidDetector(format!(
            "worst-case delay is defined here for cusum and glr, not {}",
            spec.family.name()
        ))),
    }
}

/// Average detection delay `E[(τ-Λ)^+]` with `Λ` redrawn every run.
pub fn estimate_add(
    spec: &DetectorSpec,
    nu0: &Distribution1D,
    nu1: &Distribution1D,
    rho: f64,
    runs: &DelayRuns,
) -> Result<DelayEstimate> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "rho = {rho} outside (0, 1)"
        )));
    }
    spec.validate()?;
    let pre = nu0.sampler()?;
    let post = nu1.sampler()?;
    let outcomes: Vec<(f64, bool)> = replicate(runs.n_runs, runs.seed, |rng| {
        let lambda = draw_change_point(rho, rng);
        let det = spec.start(rng).expect("validated");
        let mut t = 0u64;
        let out = run_to_alarm(
            det,
            || {
                t += 1;
                if t < lambda {
                    pre.draw(rng)
                } else {
                    post.draw(rng)
                }
            },
            runs.max_len.max(lambda),
        );
        ((out.tau as f64 - lambda as f64).max(0.0), out.censored)
    });
    let censored = outcomes.iter().filter(|o| o.1).count() as u64;
    let delays: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    Ok(DelayEstimate {
        metric: DelayMetric::Add,
        estimate: EstimateWithError::from_samples(&delays, censored, runs.seed),
        lambda_grid: None,
        per_lambda: Vec::new(),
    })
}

/// `sup_λ E_λ[τ-λ | τ >= λ]` over `lambda_grid`.
pub fn estimate_jsrp(
    spec: &DetectorSpec,
    nu0: &Distribution1D,
    nu1: &Distribution1D,
    lambda_grid: &[u64],
    runs: &DelayRuns,
) -> Result<DelayEstimate> {
    if lambda_grid.is_empty() || lambda_grid.contains(&0) {
        return Err(Error::InvalidArgument(
            "change-point grid must be non-empty and start at 1".into(),
        ));
    }
    let points = lambda_grid
        .iter()
        .map(|&l| estimate_at(spec, nu0, nu1, l, 0.0, runs))
        .collect::<Result<Vec<_>>>()?;
    Ok(sup_over(points, DelayMetric::Jsrp, lambda_grid.to_vec()))
}

/// Asymptotic worst-case delay of the robust CUSUM and its cost factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessBound {
    /// `|log α| / I`.
    pub delay_bound: f64,
    /// `D(ν1 || ν0) / I`.
    pub factor: f64,
    /// `I = D(ν1 || ν̄0) - D(ν1 || ν̲1)`, the post-change drift of `L*`.
    pub information: f64,
}

pub fn asymptotic_bound(
    nu0: &Distribution1D,
    nu1: &Distribution1D,
    lfd: &LfdPair,
    alpha: f64,
) -> Result<RobustnessBound> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha = {alpha} outside (0, 1)"
        )));
    }
    let information = kl_divergence(nu1, &lfd.nu0_bar)? - kl_divergence(nu1, &lfd.nu1_under)?;
    if !(information > 0.0) {
        return Err(Error::NonInformative(information));
    }
    Ok(RobustnessBound {
        delay_bound: alpha.ln().abs() / information,
        factor: kl_divergence(nu1, nu0)? / information,
        information,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uncertainty::Llr;

    fn n(m: f64) -> Distribution1D {
        Distribution1D::gaussian(m, 1.0)
    }

    #[test]
    fn bound_for_gaussian_band() {
        let lfd = LfdPair::new(n(0.0), n(0.1));
        let b = asymptotic_bound(&n(0.0), &n(1.0), &lfd, 0.001).unwrap();
        assert!((b.information - 0.095).abs() < 1e-12);
        assert!((b.factor - 0.5 / 0.095).abs() < 1e-9);
        assert!((b.delay_bound - 1000f64.ln() / 0.095).abs() < 1e-9);
        let at_lfd = asymptotic_bound(&n(0.0), &n(0.1), &lfd, 0.001).unwrap();
        assert!((at_lfd.factor - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bound_rejects_uninformative_alternatives() {
        let lfd = LfdPair::new(n(0.0), n(0.1));
        assert!(matches!(
            asymptotic_bound(&n(0.0), &n(0.0), &lfd, 0.001),
            Err(Error::NonInformative(_))
        ));
    }

    #[test]
    fn add_is_zero_with_immediate_alarm() {
        let spec = DetectorSpec::new(
            DetectorFamily::Shiryaev { rho: 0.1 },
            f64::NEG_INFINITY,
            Some(Llr::Affine {
                slope: 0.1,
                intercept: -0.005,
            }),
        );
        let d = estimate_add(
            &spec,
            &n(0.0),
            &n(1.0),
            0.1,
            &DelayRuns::new(500, Seed::default()),
        )
        .unwrap();
        assert_eq!(d.estimate.value, 0.0);
    }

    #[test]
    fn deterministic_ramp_delay() {
        // llr = x, x = 1 after the change: CUSUM reaches 5 after 5 post-change steps.
        let spec = DetectorSpec::new(
            DetectorFamily::Cusum,
            5.0,
            Some(Llr::Affine {
                slope: 1.0,
                intercept: 0.0,
            }),
        );
        let point = Distribution1D::gaussian(1.0, 1e-300);
        let d = estimate_wdd(
            &spec,
            &n(0.0),
            &point,
            &DelayRuns::new(200, Seed::default()),
        )
        .unwrap();
        assert_eq!(d.estimate.value, 5.0);
    }

    #[test]
    fn jsrp_sup_dominates_grid_points() {
        let spec = DetectorSpec::new(
            DetectorFamily::Cusum,
            3.0,
            Some(Llr::Affine {
                slope: 1.0,
                intercept: -0.5,
            }),
        );
        let d = estimate_jsrp(
            &spec,
            &n(0.0),
            &n(1.0),
            &[1, 5, 20],
            &DelayRuns::new(2000, Seed::new(9, 9)),
        )
        .unwrap();
        assert_eq!(d.per_lambda.len(), 3);
        for p in &d.per_lambda {
            assert!(d.estimate.value >= p.estimate.value);
        }
        assert!(estimate_jsrp(
            &spec,
            &n(0.0),
            &n(1.0),
            &[],
            &DelayRuns::new(10, Seed::default())
        )
        .is_err());
    }

    #[test]
    fn wdd_rejects_shiryaev() {
        let spec = DetectorSpec::new(
            DetectorFamily::Shiryaev { rho: 0.1 },
            1.0,
            Some(Llr::Affine {
                slope: 1.0,
                intercept: 0.0,
            }),
        );
        assert!(estimate_wdd(
            &spec,
            &n(0.0),
            &n(1.0),
            &DelayRuns::new(10, Seed::default())
        )
        .is_err());
    }
}
