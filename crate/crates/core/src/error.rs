use thiserror::Error;

/// Errors produced by the analysis and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("coordinate {coord} starts at {value}, above the barrier 1")]
    InitialAboveBarrier { coord: usize, value: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("truncation level {level} too small: zeta_{level} reached {value} at t = {time}")]
    TruncationTooSmall { level: usize, value: f64, time: f64 },

    #[error("negative control {name} = {value}")]
    NegativeControl { name: &'static str, value: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
