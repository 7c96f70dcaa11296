//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by model validation, grid handling, and the optimizers.
#[derive(Debug, Error)]
pub enum Error {
    /// A scalar parameter violates its documented constraint.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Two containers that must index together have different lengths.
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// An evaluation point falls outside the grid it is tabulated on.
    #[error("value {value} outside grid range [{lo}, {hi}]")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },

    /// The conditional density of Z given X collapses to a point mass.
    #[error("conditional density of Z given X is degenerate at |rho| = 1")]
    DegenerateConditional,

    /// A local-model index is out of range.
    #[error("model index {index} out of range for {len} local models")]
    BadModelIndex { index: usize, len: usize },

    /// The channel-output grid does not cover the encoder range plus noise tails.
    #[error(
        "y grid [{y_lo}, {y_hi}] does not cover required range [{needed_lo}, {needed_hi}]"
    )]
    GridCoverage {
        needed_lo: f64,
        needed_hi: f64,
        y_lo: f64,
        y_hi: f64,
    },

    /// A lambda bracket whose achieved powers do not straddle the target.
    #[error(
        "lambda bracket does not straddle target power {target}: \
         P(lambda_lo) = {power_lo}, P(lambda_hi) = {power_hi}"
    )]
    Bracket {
        target: f64,
        power_lo: f64,
        power_hi: f64,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
