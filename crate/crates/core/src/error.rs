use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown module `{0}`")]
    UnknownModule(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("pedestrian {ped_id}: frame {frame} is not after frame {previous}")]
    NonMonotonicFrames {
        ped_id: i64,
        previous: i64,
        frame: i64,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("zero-norm weight direction for output channel {0}")]
    ZeroNorm(usize),

    #[error("training diverged at iteration {iteration} (loss = {loss})")]
    Diverged { iteration: usize, loss: f64 },

    #[error("trajectories have no overlapping steps")]
    NoOverlap,

    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),

    #[error("unsupported checkpoint: {0}")]
    Checkpoint(String),

    #[error("{0}")]
    Precondition(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable identifier, used by the command line for machine-readable
    /// error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnknownModule(_) => "unknown_module",
            Error::InvalidScene(_) => "invalid_scene",
            Error::Parse { .. } => "parse",
            Error::NonMonotonicFrames { .. } => "non_monotonic_frames",
            Error::InvalidParams(_) => "invalid_params",
            Error::Shape { .. } => "shape",
            Error::ZeroNorm(_) => "zero_norm",
            Error::Diverged { .. } => "diverged",
            Error::NoOverlap => "no_overlap",
            Error::CheckpointMismatch(_) => "checkpoint_mismatch",
            Error::Checkpoint(_) => "checkpoint",
            Error::Precondition(_) => "precondition",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
