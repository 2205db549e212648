use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing required config key `{0}`")]
    MissingKey(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("unknown {kind} `{name}` (valid: {valid})")]
    UnknownName {
        kind: &'static str,
        name: String,
        valid: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: expected {expected} bytes, found {actual}")]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("non-finite value in `{var}` at timestep {timestep}, flat index {index}")]
    NonFinite {
        var: String,
        timestep: usize,
        index: usize,
    },

    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    #[error("malformed input {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("outputs differ between 1 and {workers} workers")]
    EquivalenceViolation { workers: usize },

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that indicate a bug or broken internal contract
    /// rather than bad user input.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            Error::EquivalenceViolation { .. } | Error::Invariant(_)
        )
    }
}
