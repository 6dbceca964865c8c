use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid uncertainty class: {0}")]
    InvalidClass(String),

    #[error("sampling table not initialized for censored distribution")]
    TableNotInitialized,

    #[error("divergence is infinite: support of p is not contained in support of q")]
    InfiniteDivergence,

    #[error("quadrature did not reach tolerance {tol:e} (estimated error {err:e})")]
    QuadratureFailure { tol: f64, err: f64 },

    #[error("root not bracketed on [{lo}, {hi}]")]
    NotBracketed { lo: f64, hi: f64 },

    #[error("uncertainty classes overlap: no censoring thresholds with a < b exist (eps = {eps}, limit = {limit})")]
    DegenerateClasses { eps: f64, limit: f64 },

    #[error("likelihood ratio is not monotone over the support")]
    NonMonotoneLR,

    #[error("unsupported pair of uncertainty classes: {0}")]
    UnsupportedClassPair(String),

    #[error("invalid detector: {0}")]
    InvalidDetector(String),

    #[error("negative likelihood ratio {0}")]
    NegativeLikelihoodRatio(f64),

    #[error(
        "threshold bracket does not straddle target {target} (last eta {eta}, metric {metric})"
    )]
    BracketFailure { target: f64, eta: f64, metric: f64 },

    #[error("calibration did not converge after {iterations} iterations")]
    CalibrationNotConverged { iterations: usize },

    #[error("mean post-change drift of the robust statistic is not positive (I = {0})")]
    NonInformative(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
