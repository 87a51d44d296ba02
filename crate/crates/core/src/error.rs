//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input data, with the offending line when known.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Invalid configuration or argument combination.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Structurally valid input that violates an operation's preconditions.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("training data for {target} contains a single class")]
    SingleClass { target: String },

    #[error("solver stopped after {iterations} iterations with gradient norm {gradient_norm:e} (target {target:e})")]
    NoConvergence {
        iterations: u32,
        gradient_norm: f64,
        target: f64,
    },

    #[error("model was trained against a different vocabulary (expected hash {expected}, found {found})")]
    VocabularyMismatch { expected: String, found: String },

    #[error("unsupported model file version: {0}")]
    Version(String),
}

impl Error {
    /// Process exit code: 1 usage, 2 data, 3 convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::NoConvergence { .. } | Error::SingleClass { .. } => 3,
            _ => 2,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn parse(path: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            line,
            message: message.into(),
        }
    }
}
