use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters, layouts or degenerate inputs.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: String, found: String },

    /// The background model has not seen enough frames yet.
    #[error("background model not ready: {seen} of {required} burn-in frames seen")]
    NotReady { seen: u64, required: u64 },

    #[error("phase error: {0}")]
    Phase(String),

    #[error("abstraction level {level} out of range 1..={levels}")]
    LevelOutOfRange { level: usize, levels: usize },

    #[error("object count mismatch: {targets} targets vs {finals} final positions")]
    CountMismatch { targets: usize, finals: usize },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("malformed file: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// True for errors caused by bad user input rather than the run itself.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
