//! Training configuration, read from a TOML file whose keys mirror the
//! struct field names exactly. MDTI_SEED in the environment overrides the
//! configured seed.

use mdti_model::ModelDims;
use mdti_traj::GeneratorConfig;
use serde::{Deserialize, Serialize};

use crate::error::{MdtiError, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub warmup_epochs: usize,
    pub min_lr: f64,
    pub weight_decay: f64,
    pub dim: usize,
    pub dropout: f64,
    pub t_segments: usize,
    pub k_patterns: usize,
    pub seed: u64,
    pub loss_weights: (f64, f64),
    pub gat_hidden: usize,
    pub heads: usize,
    pub road_layers: usize,
    pub d_lm: usize,
    pub grad_clip: f64,
    pub generator: GeneratorConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            epochs: 30,
            lr: 2e-4,
            warmup_epochs: 10,
            min_lr: 1e-6,
            weight_decay: 1e-4,
            dim: 256,
            dropout: 0.1,
            t_segments: 16,
            k_patterns: 16,
            seed: 0,
            loss_weights: (1.0, 1.0),
            gat_hidden: 32,
            heads: 4,
            road_layers: 4,
            d_lm: 256,
            grad_clip: 5.0,
            generator: GeneratorConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(MdtiError::Config("epochs and batch_size must be positive".into()));
        }
        if self.warmup_epochs >= self.epochs {
            return Err(MdtiError::Config(format!(
                "warmup_epochs {} must be < epochs {}",
                self.warmup_epochs, self.epochs
            )));
        }
        if self.lr <= 0.0 || self.min_lr <= 0.0 || self.min_lr > self.lr {
            return Err(MdtiError::Config(format!(
                "learning rates lr={} min_lr={}",
                self.lr, self.min_lr
            )));
        }
        if self.weight_decay < 0.0 || self.grad_clip <= 0.0 {
            return Err(MdtiError::Config("nonpositive decay/clip".into()));
        }
        if self.loss_weights.0 < 0.0 || self.loss_weights.1 < 0.0 {
            return Err(MdtiError::Config("negative loss weights".into()));
        }
        self.dims()
            .validate()
            .map_err(|e| MdtiError::Config(e.to_string()))
    }

    /// Seed after applying the MDTI_SEED environment override.
    pub fn effective_seed(&self) -> u64 {
        match std::env::var("MDTI_SEED") {
            Ok(v) => v.parse().unwrap_or(self.seed),
            Err(_) => self.seed,
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            d: self.dim,
            gat_hidden: self.gat_hidden,
            heads: self.heads,
            t_segments: self.t_segments,
            k_patterns: self.k_patterns,
            d_lm: self.d_lm,
            road_layers: self.road_layers,
            dropout: self.dropout,
        }
    }

    /// Stable hash of the canonical JSON form, for evaluation reports.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        format!("{:x}", hasher.finalize())
    }
}
