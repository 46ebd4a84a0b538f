use thiserror::Error;

/// Errors raised by the inference pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid fit: {0}")]
    InvalidFit(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("outcome {outcome}, level {level}: {source}")]
    Fit {
        outcome: usize,
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("replication {rep}: {source}")]
    Replication {
        rep: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// The innermost error, with outcome/replication context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Fit { source, .. } | Error::Replication { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid_arg(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
