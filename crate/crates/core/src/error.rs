//! Crate-wide error type.
//!
//! Every fallible public operation returns [`Result`]. Variants map onto the
//! CLI's documented exit codes: budget halts, config problems, data problems,
//! and numeric aborts each get a distinct code so scripts can branch on them.

use thiserror::Error;

/// Unified error type for the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Dimension or shape mismatch between operands.
    #[error("shape error: {0}")]
    Shape(String),

    /// An argument value is outside its documented domain.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A file's bytes do not match the expected format.
    #[error("format error: {0}")]
    Format(String),

    /// Dataset-level validation failure (bad code, bad label, bad record).
    #[error("data error: {0}")]
    Data(String),

    /// A config file could not be parsed or validated.
    #[error("config error (line {line}): {message}")]
    Config { line: usize, message: String },

    /// A numeric routine failed to converge or produced a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The privacy budget would be exceeded by the next step; training halts
    /// with everything up to the previous step preserved.
    #[error(
        "privacy budget exhausted at iteration {iteration}: \
         next step would spend epsilon = {epsilon:.6} > target {target:.6}"
    )]
    BudgetExceeded {
        epsilon: f64,
        target: f64,
        iteration: u64,
    },

    /// A trained model failed its quality gate.
    #[error(
        "label model reached {accuracy:.1}% held-out accuracy, below the \
         {required:.1}% gate; train for more epochs or enlarge the model"
    )]
    AccuracyGate { accuracy: f64, required: f64 },

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
