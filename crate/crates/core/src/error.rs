use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: line {line}: {message}")]
    Parse {
        context: String,
        line: usize,
        message: String,
    },

    #[error("keyframe ids must be strictly increasing, got {next} after {previous}")]
    NonMonotonicId { previous: u64, next: u64 },

    #[error("invalid rigid transform: {0}")]
    InvalidTransform(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// Two archives (or an archive and the active configuration) were
    /// produced with different parameters.
    #[error("parameter mismatch: {0}")]
    ParameterMismatch(String),

    #[error("missing ground truth position for keyframe {0}")]
    MissingGroundTruth(u64),

    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Rank-deficient cloud (fewer than two independent directions).
    #[error("degenerate point cloud: {0}")]
    DegenerateCloud(String),

    #[error("degenerate computation: {0}")]
    Degenerate(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.to_string(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code for the command-line front end:
    /// 1 usage/config, 2 data, 3 degenerate computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) => 1,
            Error::DegenerateCloud(_) | Error::Degenerate(_) => 3,
            _ => 2,
        }
    }
}
