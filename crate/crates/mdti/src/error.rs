use thiserror::Error;

#[derive(Debug, Error)]
pub enum MdtiError {
    #[error(transparent)]
    Nn(#[from] mdti_nn::NnError),
    #[error(transparent)]
    Traj(#[from] mdti_traj::TrajError),
    #[error(transparent)]
    Model(#[from] mdti_model::ModelError),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(
        "non-finite loss in epoch {epoch}, batch {batch}: cl={cl}, mlm={mlm}"
    )]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        cl: f64,
        mlm: f64,
    },
    #[error("checkpoint incompatible with current config; mismatched tensors: {0}")]
    CheckpointShapes(String),
    #[error("empty split: {0}")]
    EmptySplit(String),
}

pub type Result<T> = std::result::Result<T, MdtiError>;
