use std::path::PathBuf;

use thiserror::Error;

use crate::degradation::ModelError;
use crate::samplers::SamplerError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("{}: line {line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}: missing field `{field}`", path.display())]
    MissingField { path: PathBuf, field: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("inference failed: {0}")]
    Inference(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidArgument(_) => ErrorCategory::Usage,
            Error::Parse { .. } | Error::MissingField { .. } | Error::Io { .. } | Error::Format { .. } => {
                ErrorCategory::Data
            }
            Error::Model(_) | Error::Sampler(_) | Error::Inference(_) => ErrorCategory::Numerical,
        }
    }

    /// Short machine-readable tag for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Model(_) => "model",
            Error::Sampler(_) => "sampler",
            Error::Parse { .. } => "parse",
            Error::MissingField { .. } => "missing_field",
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::Inference(_) => "inference",
        }
    }
}
