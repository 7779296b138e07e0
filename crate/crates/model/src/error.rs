use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] mdti_nn::NnError),
    #[error(transparent)]
    Traj(#[from] mdti_traj::TrajError),
    #[error("{0}")]
    Config(String),
    #[error("trajectory too short to chunk: {0} points")]
    TooShortToChunk(usize),
    #[error("embedder failed on prompt {index}: {message}")]
    Embedder { index: usize, message: String },
    #[error("cell id {0} out of range for grid with {1} cells")]
    CellOutOfRange(usize, usize),
    #[error("segment id {0} out of range for network with {1} segments")]
    SegmentOutOfRange(usize, usize),
    #[error("no masked positions")]
    NoMaskedPositions,
    #[error("nonpositive target {0} in MAPE")]
    NonPositiveTarget(f64),
}

pub type Result<T> = std::result::Result<T, ModelError>;
