//! MDTI model components: grid encoder, GPS prompt encoder, fusion/alignment,
//! road encoder, cross-modal interactor and the training objectives.

pub mod error;
pub mod fusion;
pub mod gps_encoder;
pub mod grid_encoder;
pub mod interactor;
pub mod objectives;
pub mod road_encoder;

pub use error::{ModelError, Result};

/// Architecture widths shared by all encoders.
#[derive(Debug, Clone)]
pub struct ModelDims {
    /// Shared embedding dimension D.
    pub d: usize,
    /// Hidden width of the grid/road GAT stacks (multiple of `heads`).
    pub gat_hidden: usize,
    pub heads: usize,
    /// Temporal segment count T of the grid sequence.
    pub t_segments: usize,
    /// Pattern library size K.
    pub k_patterns: usize,
    /// Width of the text embedder output.
    pub d_lm: usize,
    pub road_layers: usize,
    pub dropout: f64,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            d: 256,
            gat_hidden: 32,
            heads: 4,
            t_segments: 16,
            k_patterns: 16,
            d_lm: 256,
            road_layers: 4,
            dropout: 0.1,
        }
    }
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.heads == 0 || self.t_segments == 0 || self.road_layers == 0 {
            return Err(ModelError::Config("zero-sized model dimension".into()));
        }
        if self.d % self.heads != 0 || self.gat_hidden % self.heads != 0 {
            return Err(ModelError::Config(format!(
                "dims d={} gat_hidden={} not divisible by {} heads",
                self.d, self.gat_hidden, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }
}
