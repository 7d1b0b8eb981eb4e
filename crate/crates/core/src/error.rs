use thiserror::Error;

/// Errors raised by the toolkit. Each variant maps onto one CLI exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("set resolution {resolution:e} is coarser than the requested scale {scale:e}")]
    Resolution { resolution: f64, scale: f64 },

    #[error("value out of range: {0}")]
    Range(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("assertion failed: {0}")]
    AssertionFailed(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit code used by the command-line harness.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::NumericDomain(_) | Error::Range(_) => 2,
            Error::Resolution { .. } | Error::Resource(_) => 3,
            Error::Inconclusive(_) => 4,
            Error::AssertionFailed(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
