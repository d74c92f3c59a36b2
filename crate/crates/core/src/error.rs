use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: duplicate id `{id}`")]
    DuplicateId {
        path: PathBuf,
        line: usize,
        id: String,
    },

    /// Input violates a documented invariant.
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("unknown {kind} `{key}`")]
    Unknown { kind: &'static str, key: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// Numerically degenerate evaluation (non-finite loss, singular denominators, ...).
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("bad artifact format in {path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn unknown(kind: &'static str, key: impl Into<String>) -> Self {
        Error::Unknown {
            kind,
            key: key.into(),
        }
    }
}
