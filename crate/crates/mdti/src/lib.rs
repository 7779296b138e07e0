//! End-to-end pipeline: configuration, model assembly, training loops,
//! checkpointing and evaluation over the synthetic trajectory corpus.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod model;
pub mod schedule;
pub mod trainer;

pub use config::TrainConfig;
pub use error::{MdtiError, Result};
pub use model::MdtiModel;
pub use schedule::Schedule;
pub use trainer::{EvalReport, TrainLog};
