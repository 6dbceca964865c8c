//! Minimax-robust quickest change detection.
//!
//! The crate builds least favorable distributions for uncertainty classes of
//! pre- and post-change laws, runs CUSUM, Shiryaev, Shiryaev–Roberts and GLR
//! stopping rules, calibrates their thresholds to false-alarm constraints by
//! Monte Carlo, and estimates their detection delays.
//!
//! ```
//! use robust_qcd::{solve_lfd, Distribution1D, UncertaintyClass};
//!
//! let pre = UncertaintyClass::Singleton { dist: Distribution1D::gaussian(0.0, 1.0) };
//! let post = UncertaintyClass::GaussianMeanBand { lo: 0.1, hi: 3.0, sd: 1.0 };
//! let lfd = solve_lfd(&pre, &post).unwrap();
//! assert_eq!(lfd.nu1_under, Distribution1D::gaussian(0.1, 1.0));
//! ```

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod detectors;
pub mod distributions;
pub mod error;
pub mod experiment;
pub mod montecarlo;
pub mod quadrature;
pub mod report;
pub mod seed;
pub mod simulator;
pub mod uncertainty;

pub use calibration::{
    calibrate_threshold, estimate_mttfa, estimate_pfa, CalibrationBudget, CalibrationMode,
    CalibrationResult, CalibrationTarget,
};
pub use detectors::{
    cusum_step, glr_step, run_to_alarm, shiryaev_step, sr_step, CusumState, DetectorFamily,
    DetectorSpec, DetectorState, GlrState, RunOutcome, ShiryaevState, SrStart, SrState,
};
pub use distributions::{kl_divergence, Distribution1D};
pub use error::{Error, Result};
pub use experiment::{
    check_table, run_calibrate, run_evaluate, run_experiment, run_jsb, run_lfd, CheckLine,
    ExperimentConfig, ExperimentId, ResultTable,
};
pub use montecarlo::EstimateWithError;
pub use report::{emit_curve, emit_table, Curve, TableFormat};
pub use seed::Seed;
pub use simulator::{
    asymptotic_bound, estimate_add, estimate_jsrp, estimate_wdd, ChangeModel, DelayEstimate,
    DelayMetric, DelayRuns, RobustnessBound,
};
pub use uncertainty::{
    check_jsb, dominates, huber_solve, huber_thresholds, solve_lfd, CdfSource, Dominance,
    JsbOptions, JsbReport, LfdPair, Llr, UncertaintyClass,
};
