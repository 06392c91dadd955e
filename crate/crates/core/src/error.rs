use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A set function over more elements than the enumeration guard allows.
    #[error("enumeration refused: ground set has {size} elements, limit is {limit}")]
    EnumerationRefused { size: usize, limit: usize },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error("validation failed for {entity}: {message}")]
    Validation { entity: String, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    /// An engine invariant failed. Always a bug, never repaired silently.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("trace integrity error: {0}")]
    Integrity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
