use thiserror::Error;

use crate::grid::Shape;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: Shape, actual: Shape },

    #[error("masked k-space has a nonzero coefficient ({magnitude:e}) at unacquired cell {index}")]
    InconsistentMaskedData { index: usize, magnitude: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("uncertainty map has zero norm; the sample ensemble is degenerate")]
    DegenerateUncertainty,

    #[error("need {needed} positive-weight locations outside the initial mask, found {available}")]
    InsufficientSupport { needed: usize, available: usize },

    #[error("instance too large for exhaustive enumeration ({size} > {limit})")]
    InstanceTooLarge { size: u128, limit: u128 },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed {format} data at byte {offset}: {message}")]
    Format {
        format: &'static str,
        offset: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
