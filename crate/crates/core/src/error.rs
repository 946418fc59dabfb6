use std::path::PathBuf;

use thiserror::Error;

use crate::domain::ModelId;

/// Errors raised by the balancer engine and its experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "frame {frame_index} for model {model} is not newer than the last recorded frame {last}"
    )]
    OutOfOrderFrame {
        model: ModelId,
        frame_index: u64,
        last: u64,
    },

    #[error("unknown model: {0}")]
    UnknownModel(ModelId),

    #[error("model repository is empty")]
    EmptyRepository,

    #[error("duplicate model id: {0}")]
    DuplicateModel(ModelId),

    #[error("current confidence is zero, score is undefined")]
    ZeroConfidence,

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("unknown strategy: {0}")]
    UnknownStrategy(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing run: {}", .0.display())]
    MissingRun(PathBuf),

    #[error("I/O failure on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed log {}: {message}", path.display())]
    MalformedLog { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that come from reading or writing files rather than
    /// from a bad configuration.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::MissingRun(_) | Error::MalformedLog { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
