use std::path::PathBuf;

use crate::model::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A hyperparameter or configuration field is out of its domain.
    #[error("{field} {reason}")]
    Config { field: &'static str, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("numeric failure at index {index}: {message}")]
    NumericFailure { index: usize, message: String },

    #[error("dataset failed validation: {0}")]
    Validation(ValidationReport),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("truncated file {}: expected {expected} bytes, found {actual}", path.display())]
    Truncated {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("unsupported format in {}: {detail}", path.display())]
    Version { path: PathBuf, detail: String },

    #[error("malformed data: {0}")]
    Format(String),
}

/// Coarse failure classes, used for process exit codes and C status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
    State,
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config { .. } | Error::InvalidArgument(_) => ErrorKind::Config,
            Error::NumericFailure { .. } => ErrorKind::Numeric,
            Error::InvalidState(_) => ErrorKind::State,
            Error::Validation(_)
            | Error::Io { .. }
            | Error::Truncated { .. }
            | Error::Version { .. }
            | Error::Format(_) => ErrorKind::Data,
        }
    }

    /// True for the I/O family, including truncated reads.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Truncated { .. })
    }
}
