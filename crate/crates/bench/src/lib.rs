//! Shared inputs for the benchmarks.

use robust_qcd::{Distribution1D, Seed};

/// `n` standard-normal observations shifted by `mean`.
pub fn gaussian_stream(mean: f64, n: usize) -> Vec<f64> {
    Distribution1D::gaussian(mean, 1.0)
        .sample(Seed::new(42, 0), n)
        .expect("gaussian sampler needs no table")
}
