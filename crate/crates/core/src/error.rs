//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by analytic evaluation, scheme construction and
/// simulation runs.
///
/// `OutOfValidity` is a signal rather than a failure: the achievability
/// bound it refers to is only proven below a rate threshold, and sweeps
/// downgrade it to a per-row status so partial curves can still be drawn.
/// It carries the raw formula value so callers that knowingly evaluate
/// outside the proven region (plots, diagnostics) can still see it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter violates a precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Rate is outside the validity region of the achievability bound.
    #[error("rate {rate} is outside the validity region (threshold {threshold}); formula value {value}")]
    OutOfValidity {
        rate: f64,
        threshold: f64,
        /// Value of the closed-form expression, evaluated anyway.
        value: f64,
    },

    /// A root solve failed to converge; carries the last bracket.
    #[error("root solve failed to converge; last bracket [{lo}, {hi}]")]
    NumericFailure { lo: f64, hi: f64 },

    /// Malformed configuration file or key.
    #[error("config error: {0}")]
    Config(String),

    /// A shape mismatch between a scheme and its inputs.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
