//! Error type shared by the whole pipeline.

use std::path::PathBuf;

/// All failures the library can surface.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed container or image header. `offset` is the byte position of
    /// the offending field.
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    /// Payload shorter or longer than the header demands.
    #[error("length error: expected {expected} payload bytes, got {got}")]
    Length { expected: u64, got: u64 },

    /// Stored float outside the [0, 1] intensity contract.
    #[error("range error: value {value} at sample {index} is outside [0, 1]")]
    Range { index: usize, value: f32 },

    /// Mismatched dimensions between two inputs; the message names the axis.
    #[error("shape error: {0}")]
    Shape(String),

    /// An operation's stated precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Mathematically invalid argument (zero vector, non-positive temperature).
    #[error("domain error: {0}")]
    Domain(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at step {step}: loss is not finite")]
    Diverged { step: usize },

    /// Invalid run configuration.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(offset: u64, reason: impl Into<String>) -> Self {
        Error::Format {
            offset,
            reason: reason.into(),
        }
    }
}
