//! Sequential stopping rules as small state machines.
//!
//! Every rule alarms when its statistic is `>= eta`.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{log_add_exp, Distribution1D};
use crate::error::{Error, Result};
use crate::uncertainty::Llr;

/// Page's CUSUM: `S_n = max(S_{n-1}, 0) + L*(X_n)`, starting from `S_0 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CusumState {
    pub statistic: f64,
    pub eta: f64,
    pub n: u64,
}

impl CusumState {
    pub fn new(eta: f64) -> Self {
        CusumState {
            statistic: 0.0,
            eta,
            n: 0,
        }
    }

    #[inline]
    pub fn step(&mut self, llr: f64) -> bool {
        self.statistic = self.statistic.max(0.0) + llr;
        self.n += 1;
        self.statistic >= self.eta
    }
}

pub fn cusum_step(mut s: CusumState, llr: f64) -> (CusumState, bool) {
    let alarm = s.step(llr);
    (s, alarm)
}

/// Shiryaev's rule under a geometric prior `π_k = ρ (1-ρ)^{k-1}`.
///
/// The statistic is the log posterior odds of a change by time `n`,
/// `log [Σ_{k<=n} π_k exp(Σ_{i=k}^{n} L*(X_i)) / (1-ρ)^n]`, tracked as
/// `log T_n` with `T_n = exp(L*(X_n)) (T_{n-1} + 1) / (1-ρ)` and `T_0 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiryaevState {
    pub log_t: f64,
    pub rho: f64,
    pub eta: f64,
    pub n: u64,
}

impl ShiryaevState {
    pub fn new(rho: f64, eta: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidDetector(format!(
                "shiryaev rho = {rho} outside (0, 1)"
            )));
        }
        Ok(ShiryaevState {
            log_t: f64::NEG_INFINITY,
            rho,
            eta,
            n: 0,
        })
    }

    /// `log ρ + log T_n`.
    pub fn statistic(&self) -> f64 {
        self.rho.ln() + self.log_t
    }

    #[inline]
    pub fn step(&mut self, llr: f64) -> bool {
        self.log_t = llr + log_add_exp(self.log_t, 0.0) - (-self.rho).ln_1p();
        self.n += 1;
        self.statistic() >= self.eta
    }
}

pub fn shiryaev_step(mut s: ShiryaevState, llr: f64) -> (ShiryaevState, bool) {
    let alarm = s.step(llr);
    (s, alarm)
}

/// How the Shiryaev–Roberts statistic is initialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SrStart {
    /// SR-r: `R_0 = r`.
    Fixed { r: f64 },
    /// `R_0 ~ ψ`, a law on the non-negative reals.
    Randomized { psi: Distribution1D },
}

impl Default for SrStart {
    fn default() -> Self {
        SrStart::Fixed { r: 0.0 }
    }
}

/// Shiryaev–Roberts: `R_n = Λ(X_n) (1 + R_{n-1})` with `Λ = exp(L*)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrState {
    pub statistic: f64,
    pub eta: f64,
    pub n: u64,
}

impl SrState {
    pub fn new(r0: f64, eta: f64) -> Result<Self> {
        if !(r0 >= 0.0) {
            return Err(Error::InvalidDetector(format!(
                "shiryaev-roberts start {r0} is negative"
            )));
        }
        Ok(SrState {
            statistic: r0,
            eta,
            n: 0,
        })
    }

    /// Step with a likelihood ratio (not its log).
    pub fn step(&mut self, lr: f64) -> Result<bool> {
        if !(lr >= 0.0) {
            return Err(Error::NegativeLikelihoodRatio(lr));
        }
        Ok(self.step_unchecked(lr))
    }

    #[inline]
    fn step_unchecked(&mut self, lr: f64) -> bool {
        self.statistic = lr * (1.0 + self.statistic);
        self.n += 1;
        self.statistic >= self.eta
    }
}

pub fn sr_step(mut s: SrState, lr: f64) -> Result<(SrState, bool)> {
    let alarm = s.step(lr)?;
    Ok((s, alarm))
}

/// Start index `k` and prefix sum `P_{k-1}` of a retained GLR candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Candidate {
    start: u64,
    prefix: f64,
}

/// Window-limited GLR CUSUM for a Gaussian mean shift from `N(0,1)` to
/// `N(θ,1)` with `θ ∈ [theta_lo, theta_hi]`:
///
/// ```text
/// G_n = max_{n-W < k <= n} sup_θ Σ_{i=k}^{n} (θ x_i - θ²/2)
/// ```
///
/// The inner supremum is attained at `θ* = clamp(S_k / m_k, lo, hi)` with
/// `S_k = Σ_{i=k}^n x_i` and `m_k = n - k + 1`. Start indices whose term is
/// beaten by a newer start for every admissible θ are discarded: the gap
/// between two starts does not change as data arrive, so the discarded start
/// can never become the maximizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlrState {
    candidates: VecDeque<Candidate>,
    prefix: f64,
    pub statistic: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub window: u64,
    pub eta: f64,
    pub n: u64,
}

impl GlrState {
    pub fn new(theta_lo: f64, theta_hi: f64, window: u64, eta: f64) -> Result<Self> {
        if !(theta_lo.is_finite() && theta_hi.is_finite() && theta_lo <= theta_hi) {
            return Err(Error::InvalidDetector(format!(
                "glr bounds [{theta_lo}, {theta_hi}]"
            )));
        }
        if window == 0 {
            return Err(Error::InvalidDetector(
                "glr window must be at least 1".into(),
            ));
        }
        Ok(GlrState {
            candidates: VecDeque::new(),
            prefix: 0.0,
            statistic: f64::NEG_INFINITY,
            theta_lo,
            theta_hi,
            window,
            eta,
            n: 0,
        })
    }

    /// Number of start indices currently retained.
    pub fn retained(&self) -> usize {
        self.candidates.len()
    }

    /// True when `older` can never again beat `newer`.
    #[inline]
    fn dominated(&self, older: &Candidate, newer: &Candidate) -> bool {
        let gap = newer.prefix - older.prefix;
        let len = (newer.start - older.start) as f64;
        if self.theta_lo >= 0.0 {
            gap <= 0.5 * self.theta_lo * len
        } else if self.theta_hi <= 0.0 {
            gap >= 0.5 * self.theta_hi * len
        } else {
            false
        }
    }

    #[inline]
    pub fn step(&mut self, x: f64) -> bool {
        let fresh = Candidate {
            start: self.n + 1,
            prefix: self.prefix,
        };
        while let Some(back) = self.candidates.back() {
            if self.dominated(back, &fresh) {
                self.candidates.pop_back();
            } else {
                break;
            }
        }
        self.candidates.push_back(fresh);
        self.n += 1;
        self.prefix += x;
        let oldest = self.n.saturating_sub(self.window) + 1;
        while self.candidates.front().is_some_and(|c| c.start < oldest) {
            self.candidates.pop_front();
        }
        let mut best = f64::NEG_INFINITY;
        for c in &self.candidates {
            let s = self.prefix - c.prefix;
            let m = (self.n - c.start + 1) as f64;
            let theta = (s / m).clamp(self.theta_lo, self.theta_hi);
            best = best.max(theta * s - 0.5 * theta * theta * m);
        }
        self.statistic = best;
        best >= self.eta
    }
}

pub fn glr_step(mut s: GlrState, x: f64) -> (GlrState, bool) {
    let alarm = s.step(x);
    (s, alarm)
}

pub const DEFAULT_GLR_WINDOW: u64 = 2000;

fn default_window() -> u64 {
    DEFAULT_GLR_WINDOW
}

/// A stopping-rule family and its parameters, without the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DetectorFamily {
    Cusum,
    Shiryaev {
        rho: f64,
    },
    Sr {
        #[serde(default)]
        r: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        psi: Option<Distribution1D>,
    },
    Glr {
        #[serde(default = "default_window")]
        window: u64,
        theta_lo: f64,
        theta_hi: f64,
    },
}

impl DetectorFamily {
    pub fn name(&self) -> &'static str {
        match self {
            DetectorFamily::Cusum => "cusum",
            DetectorFamily::Shiryaev { .. } => "shiryaev",
            DetectorFamily::Sr { .. } => "sr",
            DetectorFamily::Glr { .. } => "glr",
        }
    }

    pub fn needs_llr(&self) -> bool {
        !matches!(self, DetectorFamily::Glr { .. })
    }

    pub fn sr_start(&self) -> Option<SrStart> {
        match self {
            DetectorFamily::Sr { psi: Some(psi), .. } => {
                Some(SrStart::Randomized { psi: psi.clone() })
            }
            DetectorFamily::Sr { r, .. } => Some(SrStart::Fixed { r: *r }),
            _ => None,
        }
    }
}

/// A complete detector: family, threshold and the log-likelihood ratio it
/// accumulates. GLR rules work on raw observations and ignore `llr`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub family: DetectorFamily,
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llr: Option<Llr>,
}

impl DetectorSpec {
    pub fn new(family: DetectorFamily, eta: f64, llr: Option<Llr>) -> Self {
        DetectorSpec { family, eta, llr }
    }

    pub fn with_eta(&self, eta: f64) -> Self {
        DetectorSpec {
            eta,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eta.is_nan() {
            return Err(Error::InvalidDetector("threshold is NaN".into()));
        }
        if self.family.needs_llr() && self.llr.is_none() {
            return Err(Error::InvalidDetector(format!(
                "{} needs a log-likelihood ratio",
                self.family.name()
            )));
        }
        if let Some(SrStart::Randomized { psi }) = self.family.sr_start() {
            psi.sampler()?;
            if psi.support().0 < 0.0 {
                return Err(Error::InvalidDetector(
                    "sr start law must live on [0, inf)".into(),
                ));
            }
        }
        self.start(&mut crate::seed::Seed::default().rng())
            .map(|_| ())
    }

    /// Fresh detector state. Randomized Shiryaev–Roberts starts draw `R_0`
    /// from `rng`.
    pub fn start<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Running<'_>> {
        let state = match &self.family {
            DetectorFamily::Cusum => DetectorState::Cusum(CusumState::new(self.eta)),
            DetectorFamily::Shiryaev { rho } => {
                DetectorState::Shiryaev(ShiryaevState::new(*rho, self.eta)?)
            }
            DetectorFamily::Sr { r, psi } => {
                let r0 = match psi {
                    Some(psi) => psi.sampler()?.draw(rng).max(0.0),
                    None => *r,
                };
                DetectorState::Sr(SrState::new(r0, self.eta)?)
            }
            DetectorFamily::Glr {
                window,
                theta_lo,
                theta_hi,
            } => DetectorState::Glr(GlrState::new(*theta_lo, *theta_hi, *window, self.eta)?),
        };
        let llr = if self.family.needs_llr() {
            Some(self.llr.as_ref().ok_or_else(|| {
                Error::InvalidDetector(format!(
                    "{} needs a log-likelihood ratio",
                    self.family.name()
                ))
            })?)
        } else {
            None
        };
        Ok(Running { state, llr })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DetectorState {
    Cusum(CusumState),
    Shiryaev(ShiryaevState),
    Sr(SrState),
    Glr(GlrState),
}

impl DetectorState {
    pub fn statistic(&self) -> f64 {
        match self {
            DetectorState::Cusum(s) => s.statistic,
            DetectorState::Shiryaev(s) => s.statistic(),
            DetectorState::Sr(s) => s.statistic,
            DetectorState::Glr(s) => s.statistic,
        }
    }

    pub fn n(&self) -> u64 {
        match self {
            DetectorState::Cusum(s) => s.n,
            DetectorState::Shiryaev(s) => s.n,
            DetectorState::Sr(s) => s.n,
            DetectorState::Glr(s) => s.n,
        }
    }
}

/// A detector consuming raw observations.
#[derive(Debug, Clone)]
pub struct Running<'a> {
    pub state: DetectorState,
    llr: Option<&'a Llr>,
}

impl Running<'_> {
    /// Feeds one observation; returns whether the rule alarms.
    #[inline]
    pub fn observe(&mut self, x: f64) -> bool {
        match &mut self.state {
            DetectorState::Cusum(s) => s.step(self.llr.expect("checked at start").eval(x)),
            DetectorState::Shiryaev(s) => s.step(self.llr.expect("checked at start").eval(x)),
            DetectorState::Sr(s) => {
                s.step_unchecked(self.llr.expect("checked at start").eval(x).exp())
            }
            DetectorState::Glr(s) => s.step(x),
        }
    }

    pub fn statistic(&self) -> f64 {
        self.state.statistic()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    /// First alarm time, or `max_len` when censored.
    pub tau: u64,
    pub censored: bool,
    pub state: DetectorState,
}

/// Feeds observations from `next` until the first alarm or `max_len` steps.
pub fn run_to_alarm<F: FnMut() -> f64>(
    mut detector: Running<'_>,
    mut next: F,
    max_len: u64,
) -> RunOutcome {
    let max_len = max_len.max(1);
    for t in 1..=max_len {
        if detector.observe(next()) {
            return RunOutcome {
                tau: t,
                censored: false,
                state: detector.state,
            };
        }
    }
    RunOutcome {
        tau: max_len,
        censored: true,
        state: detector.state,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cusum_examples() {
        let s = CusumState {
            statistic: 2.0,
            eta: 5.0,
            n: 0,
        };
        let (s, alarm) = cusum_step(s, -3.0);
        assert_eq!(s.statistic, -1.0);
        assert!(!alarm);
        let (s, _) = cusum_step(s, 0.5);
        assert_eq!(s.statistic, 0.5);
        let (s, alarm) = cusum_step(
            CusumState {
                statistic: 4.9,
                eta: 5.0,
                n: 0,
            },
            0.2,
        );
        assert!((s.statistic - 5.1).abs() < 1e-12);
        assert!(alarm);
    }

    #[test]
    fn shiryaev_first_step() {
        let s = ShiryaevState::new(0.1, 100.0).unwrap();
        let (s, _) = shiryaev_step(s, 0.7);
        let expected = 0.1f64.ln() - 0.9f64.ln() + 0.7;
        assert!((s.statistic() - expected).abs() < 1e-14);
        assert!(ShiryaevState::new(1.0, 0.0).is_err());
    }

    #[test]
    fn shiryaev_zero_llr_prior_odds() {
        let mut s = ShiryaevState::new(0.5, 100.0).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for n in 1..=30 {
            s.step(0.0);
            // Prior odds P(Λ <= n) / P(Λ > n) = 2^n - 1.
            let expected = (2f64.powi(n) - 1.0).ln();
            assert!((s.statistic() - expected).abs() < 1e-12, "n = {n}");
            assert!(s.statistic() > prev);
            prev = s.statistic();
        }
    }

    #[test]
    fn sr_examples() {
        let (s, _) = sr_step(SrState::new(0.0, 10.0).unwrap(), 1.0).unwrap();
        assert_eq!(s.statistic, 1.0);
        let (s, _) = sr_step(SrState::new(2.5, 10.0).unwrap(), 3.0).unwrap();
        assert_eq!(s.statistic, 3.0 * 3.5);
        let mut s = SrState::new(0.0, 1e9).unwrap();
        for n in 1..=50 {
            s.step(1.0).unwrap();
            assert_eq!(s.statistic, n as f64);
        }
        assert_eq!(sr_step(s, -0.5), Err(Error::NegativeLikelihoodRatio(-0.5)));
    }

    #[test]
    fn glr_hand_example() {
        let mut s = GlrState::new(0.1, 3.0, 50, 100.0).unwrap();
        for _ in 0..4 {
            s.step(0.5);
        }
        // k = 1 term: θ* = 0.5, 0.5·2 − 4·0.125 = 0.5, and it is the maximum.
        assert!((s.statistic - 0.5).abs() < 1e-12);
    }

    #[test]
    fn glr_clamps_to_upper_bound() {
        let mut s = GlrState::new(0.1, 3.0, 50, 1e9).unwrap();
        s.step(10.0);
        assert!((s.statistic - (3.0 * 10.0 - 4.5)).abs() < 1e-12);
    }

    #[test]
    fn run_to_alarm_examples() {
        let llr = Llr::Affine {
            slope: 1.0,
            intercept: 0.0,
        };
        let spec = DetectorSpec::new(DetectorFamily::Cusum, 5.0, Some(llr.clone()));
        let mut rng = crate::seed::Seed::default().rng();
        let out = run_to_alarm(spec.start(&mut rng).unwrap(), || 1.0, 1000);
        assert_eq!((out.tau, out.censored), (5, false));

        let spec = DetectorSpec::new(DetectorFamily::Cusum, 0.0, Some(llr.clone()));
        let out = run_to_alarm(spec.start(&mut rng).unwrap(), || 0.3, 1000);
        assert_eq!(out.tau, 1);

        let spec = DetectorSpec::new(DetectorFamily::Cusum, 1e12, Some(llr));
        let out = run_to_alarm(spec.start(&mut rng).unwrap(), || 1.0, 100);
        assert_eq!((out.tau, out.censored), (100, true));
    }

    #[test]
    fn spec_validation() {
        assert!(DetectorSpec::new(DetectorFamily::Cusum, 1.0, None)
            .validate()
            .is_err());
        let glr = DetectorFamily::Glr {
            window: 0,
            theta_lo: 0.1,
            theta_hi: 3.0,
        };
        assert!(DetectorSpec::new(glr, 1.0, None).validate().is_err());
        let glr = DetectorFamily::Glr {
            window: 10,
            theta_lo: 0.1,
            theta_hi: 3.0,
        };
        assert!(DetectorSpec::new(glr, 1.0, None).validate().is_ok());
    }

    #[test]
    fn family_config_shape() {
        let f: DetectorFamily =
            serde_json::from_str(r#"{"type":"glr","theta_lo":0.1,"theta_hi":3.0}"#).unwrap();
        assert_eq!(
            f,
            DetectorFamily::Glr {
                window: 2000,
                theta_lo: 0.1,
                theta_hi: 3.0
            }
        );
        let f: DetectorFamily = serde_json::from_str(r#"{"type":"sr"}"#).unwrap();
        assert_eq!(f, DetectorFamily::Sr { r: 0.0, psi: None });
    }
}
