//! Error and moment estimation on coupled paths, and log-log rate fits.
//!
//! p-th moments are estimated by median of means over batches assigned by
//! path index (`index mod B`). Rate verdicts are one-sided unless a preset
//! asks for a band: an error that decays faster than predicted passes.

pub mod estimators;
pub mod experiments;
pub mod fit;
pub mod rates;

pub use estimators::{median_of_means, spearman, MomEstimate, DEFAULT_BATCHES};
pub use experiments::{
    epsilon_bias, grid_increment_scaling, moment_scaling_driver, strong_error, strong_errors, weak_error,
    BiasReport, ErrorReport, Reference, RunParams, TestFunction, Variable, WeakReport, MAX_ABORT_FRACTION,
};
pub use fit::{fit_rate, Check, RateFit, Verdict};
pub use rates::{predicted_exponent, Claim, Kind, RateCase};
