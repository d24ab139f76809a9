//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by simulation, reconstruction, metrics and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// An input value is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structural argument (dimensions, list lengths, parameter ranges) is invalid.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A file does not conform to one of the documented formats.
    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },

    /// Underlying I/O failure, with the path that was being accessed.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A computation produced a non-finite or otherwise unusable result.
    #[error("numerical error: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn format(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
