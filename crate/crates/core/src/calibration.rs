//! False-alarm metrics and threshold calibration.
//!
//! Calibration evaluates every candidate threshold on the same replication
//! streams, so the estimated metric is a monotone step function of the
//! threshold and bisection on it is well defined.

use std::cell::Cell;

use log::warn;
use rand::Rng;
use rand_distr::Geometric;
use serde::{Deserialize, Serialize};

use crate::detectors::{run_to_alarm, DetectorFamily, DetectorSpec};
use crate::distributions::Distribution1D;
use crate::error::{Error, Result};
use crate::montecarlo::{replicate, EstimateWithError};
use crate::seed::Seed;

pub const MIN_RUNS: u64 = 100;

/// Mean time to false alarm under pure pre-change data `nu0`.
pub fn estimate_mttfa(
    spec: &DetectorSpec,
    nu0: &Distribution1D,
    n_runs: u64,
    max_len: u64,
    seed: Seed,
) -> Result<EstimateWithError> {
    let est = mttfa_runs(spec, nu0, n_runs, max_len, seed)?;
    warn_censoring(&est, max_len);
    Ok(est)
}

fn warn_censoring(est: &EstimateWithError, max_len: u64) {
    if est.censored_fraction > 0.01 {
        warn!(
            "{:.2}% of false-alarm runs hit max_len = {max_len}; the mean time to false alarm is biased low",
            100.0 * est.censored_fraction
        );
    }
}

fn mttfa_runs(
    spec: &DetectorSpec,
    nu0: &Distribution1D,
    n_runs: u64,
    max_len: u64,
    seed: Seed,
) -> Result<EstimateWithError> {
    if n_runs < MIN_RUNS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_RUNS} runs, got {n_runs}"
        )));
    }
    spec.validate()?;
    let sampler = nu0.sampler()?;
    let outcomes: Vec<(u64, bool)> = replicate(n_runs, seed, |rng| {
        let det = spec.start(rng).expect("validated");
        let out = run_to_alarm(det, || sampler.draw(rng), max_len);
        (out.tau, out.censored)
    });
    let censored = outcomes.iter().filter(|o| o.1).count() as u64;
    let taus: Vec<f64> = outcomes.iter().map(|o| o.0 as f64).collect();
    Ok(EstimateWithError::from_samples(&taus, censored, seed))
}

/// Draws a change point from the geometric prior `P(Λ = k) = ρ (1-ρ)^{k-1}`.
pub fn draw_change_point<R: Rng + ?Sized>(rho: f64, rng: &mut R) -> u64 {
    let g = Geometric::new(rho).expect("rho validated");
    1 + rng.sample(g)
}

/// Probability of false alarm `P(τ < Λ)` with a geometric change point.
///
/// Only the pre-change segment decides whether a run is a false alarm, so
/// `nu1` never influences the estimate.
pub fn estimate_pfa(
    spec: &DetectorSpec,
    nu0: &Distribution1D,
    nu1: &Distribution1D,
    rho: f64,
    n_runs: u64,
    seed: Seed,
) -> Result<EstimateWithError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "rho = {rho} outside (0, 1)"
        )));
    }
    if n_runs == 0 {
        return Err(Error::InvalidArgument("need at least one run".into()));
    }
    spec.validate()?;
    nu1.validate()?;
    let sampler = nu0.sampler()?;
    let hits: Vec<f64> = replicate(n_runs, seed, |rng| {
        let lambda = draw_change_point(rho, rng);
        if lambda == 1 {
            return 0.0;
        }
        let det = spec.start(rng).expect("validated");
        let out = run_to_alarm(det, || sampler.draw(rng), lambda - 1);
        if out.censored {
            0.0
        } else {
            1.0
        }
    });
    Ok(EstimateWithError::from_samples(&hits, 0, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMode {
    /// Mean time to false alarm equals `1 / alpha`.
    Far,
    /// Probability of false alarm equals `alpha`.
    Pfa,
}

/// The false-alarm constraint and the laws it is evaluated under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub mode: CalibrationMode,
    pub alpha: f64,
    pub nu0: Distribution1D,
    /// Post-change law and prior parameter, PFA mode only.
    #[serde(default)]
    pub nu1: Option<Distribution1D>,
    #[serde(default)]
    pub rho: Option<f64>,
}

impl CalibrationTarget {
    pub fn far(alpha: f64, nu0: Distribution1D) -> Self {
        CalibrationTarget {
            mode: CalibrationMode::Far,
            alpha,
            nu0,
            nu1: None,
            rho: None,
        }
    }

    pub fn pfa(alpha: f64, nu0: Distribution1D, nu1: Distribution1D, rho: f64) -> Self {
        CalibrationTarget {
            mode: CalibrationMode::Pfa,
            alpha,
            nu0,
            nu1: Some(nu1),
            rho: Some(rho),
        }
    }

    /// Value the estimated metric must hit.
    pub fn metric_target(&self) -> f64 {
        match self.mode {
            CalibrationMode::Far => 1.0 / self.alpha,
            CalibrationMode::Pfa => self.alpha,
        }
    }
}

/// Monte Carlo effort for a calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationBudget {
    /// Runs for the bracketing phase and the first bisection step.
    pub start_runs: u64,
    /// Per-iterate ceiling; the run count doubles each bisection step.
    pub max_runs: u64,
    /// Soft cap on runs summed over all iterates.
    pub total_cap: u64,
    /// Run-length cap for false-alarm runs; `None` means `50 / alpha`.
    pub max_len: Option<u64>,
    /// Relative tolerance floor of the acceptance rule.
    pub rel_tol: f64,
    /// Relative standard error at which an iterate is precise enough to stop
    /// before reaching `max_runs`.
    pub precision: f64,
}

impl Default for CalibrationBudget {
    fn default() -> Self {
        CalibrationBudget {
            start_runs: 1_000,
            max_runs: 16_000,
            total_cap: 100_000,
            max_len: None,
            rel_tol: 0.02,
            precision: 0.01,
        }
    }
}

impl CalibrationBudget {
    pub fn pfa_default() -> Self {
        CalibrationBudget {
            start_runs: 20_000,
            max_runs: 1_000_000,
            total_cap: 4_000_000,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub eta: f64,
    pub achieved: EstimateWithError,
    pub target: f64,
    pub alpha: f64,
    pub mode: CalibrationMode,
    pub iterations: u64,
    pub total_runs: u64,
}

impl CalibrationResult {
    /// `|achieved - target| <= max(2 stderr, rel_tol target)`.
    pub fn within_tolerance(&self, rel_tol: f64) -> bool {
        (self.achieved.value - self.target).abs()
            <= (2.0 * self.achieved.stderr).max(rel_tol * self.target)
    }
}

/// Threshold search runs in `ln η` for Shiryaev–Roberts, whose statistic is
/// on a multiplicative scale, and in `η` otherwise.
fn to_eta(family: &DetectorFamily, u: f64) -> f64 {
    match family {
        DetectorFamily::Sr { .. } => u.exp(),
        _ => u,
    }
}

/// Rough first threshold: `log(1/alpha)` on the log-likelihood scale.
pub fn initial_threshold(family: &DetectorFamily, alpha: f64) -> f64 {
    let base = (1.0 / alpha).ln();
    match family {
        DetectorFamily::Sr { .. } => 1.0 / alpha,
        _ => base,
    }
}

fn initial_coordinate(family: &DetectorFamily, alpha: f64) -> f64 {
    match family {
        DetectorFamily::Sr { .. } => initial_threshold(family, alpha).ln(),
        _ => initial_threshold(family, alpha),
    }
}

const BRACKET_STEP: f64 = 2.0;
const MAX_EXPANSIONS: usize = 40;
const MAX_ITERATIONS: u64 = 120;

/// Finds `η` such that the false-alarm metric of `spec` meets `target`.
///
/// Starting from [`initial_threshold`], the bracket is widened in steps of 2
/// until it straddles the target, then bisected while the per-iterate run
/// count doubles from `start_runs` up to `max_runs`. An iterate is accepted
/// when `|metric - target| <= max(2 stderr, rel_tol target)` and it is either
/// precise to `precision` or at the run ceiling.
pub fn calibrate_threshold(
    spec: &DetectorSpec,
    target: &CalibrationTarget,
    budget: &CalibrationBudget,
    seed: Seed,
) -> Result<CalibrationResult> {
    if !(target.alpha > 0.0 && target.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha = {} outside (0, 1)",
            target.alpha
        )));
    }
    if budget.start_runs < MIN_RUNS || budget.max_runs < budget.start_runs {
        return Err(Error::InvalidArgument(
            "calibration budget needs 100 <= start_runs <= max_runs".into(),
        ));
    }
    target.nu0.validate()?;
    let goal = target.metric_target();
    let max_len = budget
        .max_len
        .unwrap_or_else(|| (50.0 / target.alpha).ceil() as u64);
    let (nu1, rho) = match target.mode {
        CalibrationMode::Pfa => (
            target
                .nu1
                .clone()
                .ok_or_else(|| Error::InvalidArgument("PFA calibration needs nu1".into()))?,
            target
                .rho
                .ok_or_else(|| Error::InvalidArgument("PFA calibration needs rho".into()))?,
        ),
        CalibrationMode::Far => (target.nu0.clone(), 0.5),
    };
    let total_runs = Cell::new(0u64);
    let iterations = Cell::new(0u64);
    let evaluate = |u: f64, runs: u64| -> Result<EstimateWithError> {
        total_runs.set(total_runs.get() + runs);
        iterations.set(iterations.get() + 1);
        let s = spec.with_eta(to_eta(&spec.family, u));
        match target.mode {
            CalibrationMode::Far => mttfa_runs(&s, &target.nu0, runs, max_len, seed),
            CalibrationMode::Pfa => estimate_pfa(&s, &target.nu0, &nu1, rho, runs, seed),
        }
    };
    // The threshold must go up when the metric says alarms come too often.
    let needs_higher = |v: f64| match target.mode {
        CalibrationMode::Far => v < goal,
        CalibrationMode::Pfa => v > goal,
    };
    let accepts = |e: &EstimateWithError| {
        (e.value - goal).abs() <= (2.0 * e.stderr).max(budget.rel_tol * goal)
    };

    let mut runs = budget.start_runs;
    let u0 = initial_coordinate(&spec.family, target.alpha);
    let first = evaluate(u0, runs)?;
    let (mut lo, mut hi) = (u0, u0);
    let mut last = first;
    if needs_higher(first.value) {
        let mut ok = false;
        for _ in 0..MAX_EXPANSIONS {
            lo = hi;
            hi += BRACKET_STEP;
            last = evaluate(hi, runs)?;
            if !needs_higher(last.value) {
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::BracketFailure {
                target: goal,
                eta: to_eta(&spec.family, hi),
                metric: last.value,
            });
        }
    } else {
        let mut ok = false;
        for _ in 0..MAX_EXPANSIONS {
            hi = lo;
            lo -= BRACKET_STEP;
            last = evaluate(lo, runs)?;
            if needs_higher(last.value) {
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::BracketFailure {
                target: goal,
                eta: to_eta(&spec.family, lo),
                metric: last.value,
            });
        }
    }

    loop {
        if iterations.get() > MAX_ITERATIONS {
            return Err(Error::CalibrationNotConverged {
                iterations: iterations.get() as usize,
            });
        }
        if hi - lo < 1e-9 {
            // The crossing moved outside the bracket as the run count grew.
            let e_lo = evaluate(lo, runs)?;
            if !needs_higher(e_lo.value) {
                lo -= 0.5;
            }
            let e_hi = evaluate(hi, runs)?;
            if needs_higher(e_hi.value) {
                hi += 0.5;
            }
        }
        let mid = 0.5 * (lo + hi);
        let est = evaluate(mid, runs)?;
        let precise = runs >= budget.max_runs
            || est.rel_stderr() <= budget.precision
            || total_runs.get() >= budget.total_cap;
        if precise && accepts(&est) {
            if target.mode == CalibrationMode::Far {
                warn_censoring(&est, max_len);
            }
            return Ok(CalibrationResult {
                eta: to_eta(&spec.family, mid),
                achieved: est,
                target: goal,
                alpha: target.alpha,
                mode: target.mode,
                iterations: iterations.get(),
                total_runs: total_runs.get(),
            });
        }
        if needs_higher(est.value) {
            lo = mid;
        } else {
            hi = mid;
        }
        runs = (runs * 2).min(budget.max_runs);
    }
}
