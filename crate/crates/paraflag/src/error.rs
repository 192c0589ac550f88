//! Crate-wide error type and result alias.

use thiserror::Error;

/// Errors produced by grid construction, symbol evaluation, and the
/// operator engines. Every variant carries enough context to name the
/// offending input.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Invalid construction parameter (dimension, exponent, range, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Two objects that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    /// A sample or coefficient is NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    /// A frequency-side operation would wrap around the Nyquist band.
    #[error("aliasing: {0}")]
    Aliasing(String),
    /// A direct-summation request exceeds the configured cost budget.
    #[error("budget exceeded: {0}")]
    Budget(String),
    /// A redundant internal cross-check failed; results are not trustworthy.
    #[error("internal consistency check failed: {0}")]
    InternalCheck(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of redundant internal cross-checks, as opposed to
    /// rejected inputs.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::InternalCheck(_))
    }
}
