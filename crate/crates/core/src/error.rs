use thiserror::Error;

/// Errors raised by space evaluation, construction and the solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Caller supplied arguments that violate an operation's preconditions.
    #[error("usage error: {0}")]
    Usage(String),

    /// A point lies outside the carrier of the space.
    #[error("domain error: point {point:?} is outside the carrier")]
    OutsideCarrier { point: Vec<f64> },

    /// A Picard iterate left the carrier.
    #[error("domain error: iterate {index} escaped the carrier at {point:?}")]
    Escaped { index: usize, point: Vec<f64> },

    /// A space or map failed its construction gate.
    #[error("construction error: {message}")]
    Construction {
        message: String,
        witness: Vec<Vec<f64>>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}
