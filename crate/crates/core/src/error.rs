use thiserror::Error;

/// Errors produced by the numerical toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Bessel order above the supported range.
    #[error("unsupported Bessel order {order} (maximum {max})")]
    UnsupportedOrder { order: u32, max: u32 },

    /// Adaptive quadrature did not reach the requested tolerance.
    #[error("accuracy error: estimate {estimate:e}, error bound {achieved:e} > tolerance {tolerance:e}")]
    Accuracy {
        estimate: f64,
        achieved: f64,
        tolerance: f64,
    },

    /// A series could not be certified within the term budget.
    #[error("truncation error after {terms} terms: partial value {value:e}, tail bound {tail_bound:e}")]
    Truncation {
        value: f64,
        tail_bound: f64,
        terms: usize,
    },

    /// Invalid configuration for a solver or experiment.
    #[error("configuration error: {0}")]
    Config(String),

    /// The requested quantity has no published closed form for this input.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Every sampled pair of a stability audit was skipped.
    #[error("degenerate audit: all {skipped} sampled pairs had trace gaps below the resolution floor")]
    DegenerateAudit { skipped: usize },

    /// Invariant violation that indicates a bug.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
