//! Replication plumbing shared by the calibration and delay estimators.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seed::Seed;

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub value: f64,
    /// Sample standard deviation over `sqrt(n_runs)`.
    pub stderr: f64,
    pub n_runs: u64,
    /// Fraction of runs that hit the length cap.
    pub censored_fraction: f64,
    pub seed: Seed,
}

impl EstimateWithError {
    /// Mean and standard error of `samples`. `censored` counts samples that
    /// were truncated by a run-length cap.
    pub fn from_samples(samples: &[f64], censored: u64, seed: Seed) -> Self {
        let n = samples.len();
        if n == 0 {
            return EstimateWithError {
                value: f64::NAN,
                stderr: f64::NAN,
                n_runs: 0,
                censored_fraction: 0.0,
                seed,
            };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        EstimateWithError {
            value: mean,
            stderr,
            n_runs: n as u64,
            censored_fraction: censored as f64 / n as f64,
            seed,
        }
    }

    /// Relative standard error.
    pub fn rel_stderr(&self) -> f64 {
        self.stderr / self.value.abs()
    }

    /// Half-width of the two-sided 95% normal interval.
    pub fn ci95(&self) -> f64 {
        1.959_963_984_540_054 * self.stderr
    }

    /// `sqrt(se_a² + se_b²)`.
    pub fn pooled_stderr(&self, other: &EstimateWithError) -> f64 {
        self.stderr.hypot(other.stderr)
    }
}

/// Runs `f` once per replication with that replication's generator and
/// returns results in replication order, independent of thread count.
pub fn replicate<T, F>(n_runs: u64, seed: Seed, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    (0..n_runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = seed.replication(run).rng();
            f(&mut rng)
        })
        .collect()
}
