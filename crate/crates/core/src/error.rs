use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A grid, time or clustering specification violates its invariants.
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// The integrated state became non-finite.
    #[error("trajectory from seed {seed} ({x:?}) became non-finite at step {step}")]
    BlowUp { seed: usize, x: Vec<f64>, step: usize },

    /// A configuration document failed to parse.
    #[error("config parse error: {0}")]
    ConfigParse(#[from] serde_json::Error),

    /// A configuration value is semantically wrong. `key` is the dotted path.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("unknown field `{0}`")]
    UnknownField(String),

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{0}")]
    Export(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse error category, used by the command line front end for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Integration,
    Io,
    Numeric,
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::ConfigParse(_) | Error::Config { .. } | Error::UnknownField(_) => {
                ErrorCategory::Config
            }
            Error::BlowUp { .. } => ErrorCategory::Integration,
            Error::Io(_) | Error::Format { .. } | Error::Export(_) => ErrorCategory::Io,
            Error::InvalidSpec(_) | Error::Shape(_) => ErrorCategory::Numeric,
        }
    }
}
