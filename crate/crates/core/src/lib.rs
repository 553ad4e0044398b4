//! Differentially private inference on the mean difference between two groups
//! of zero-inflated, right-skewed data.
//!
//! The raw observations of each group are randomly partitioned, partition means
//! are differenced, and the resulting partition-level differences are censored
//! at (privately estimated) quantiles. Estimators built on the censored data are
//! sanitized with Laplace (ε-DP) or Gaussian (ρ-zCDP) noise, repeated `m` times
//! and pooled with a between/within variance combination rule.
//!
//! Module map:
//!
//! * [`privacy`] budgets, noise mechanisms and the budget ledger.
//! * [`quantile`] exponential-mechanism quantiles.
//! * [`pac`] partitioning, differencing and censoring.
//! * [`estimators`] the 2S/4S/4SDD/6S/6SDD/winsorized/trimmed/naive estimators.
//! * [`inference`] the multiple-sanitization combination rule.
//! * [`sim`] data generators and the Monte Carlo scenario runner.

pub mod error;
pub mod estimators;
pub mod inference;
pub mod normal;
pub mod pac;
pub mod privacy;
pub mod quantile;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use estimators::{
    estimate_2s, estimate_pac, Inference, McmcConfig, Method, MethodSpec, PassOutcome,
    PointEstimate, SanitizedStats,
};
pub use inference::{combine, CombinedInference};
pub use pac::{PACData, PartitionDifferences};
pub use privacy::{Flavor, GlobalBounds, PrivacyBudget};
pub use rng::PacRng;

/// `⌈x⌉` for count-valued products such as `P·α`, tolerant of the rounding
/// error in expressions like `100.0 * (1.0 - 0.1 - 0.1)`.
pub fn ceil_count(x: f64) -> f64 {
    (x - 1e-9 * x.abs().max(1.0)).ceil()
}
