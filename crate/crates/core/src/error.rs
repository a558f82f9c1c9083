use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("eigensolver failed to converge at index {index} after {iterations} iterations")]
    Convergence { index: usize, iterations: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("phase {theta}: {source}")]
    AtPhase {
        theta: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
