//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology spec: {0}")]
    InvalidSpec(String),

    #[error("unknown switch {0}")]
    UnknownSwitch(u32),

    #[error("flow {0} has no route assigned")]
    MissingRoute(u32),

    #[error("step size {dt} s out of range (must be > 0 and <= {max} s)")]
    StepSize { dt: f64, max: f64 },

    #[error("out-of-order record: t={t} precedes latest t={latest}")]
    OutOfOrder { t: f64, latest: f64 },

    #[error("unknown scenario id {0:?}")]
    UnknownScenario(String),

    #[error("training aborted at episode {episode}: {reason}")]
    TrainingAborted { episode: usize, reason: String },

    #[error("simulation diverged at t={t}: {reason}")]
    Diverged { t: f64, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("weights file: {0}")]
    WeightsFormat(String),

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
