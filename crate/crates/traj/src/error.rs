use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrajError {
    #[error("invalid GPS point: {0}")]
    InvalidPoint(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("point {index} outside grid bbox: ({lon}, {lat})")]
    OutOfBounds { index: usize, lon: f64, lat: f64 },
    #[error("empty input: {0}")]
    Empty(String),
    #[error("invalid ratios: {0}")]
    Ratios(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, TrajError>;
