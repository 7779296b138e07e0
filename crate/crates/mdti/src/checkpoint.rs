//! Checkpoint directory format: `manifest.json` describing tensor names,
//! shapes and byte offsets plus `weights.bin`, raw little-endian f32 values.
//! Save -> load -> save is byte-identical.

use std::fs;
use std::path::Path;

use mdti_model::gps_encoder::PatternLibrary;
use mdti_nn::{LayerParams, Tensor};
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::{MdtiError, Result};
use crate::model::MdtiModel;

#[derive(Debug, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Byte offset into weights.bin.
    pub offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub dtype: String,
    pub tensors: Vec<TensorEntry>,
    pub config: TrainConfig,
    pub pattern_library: Vec<Vec<f64>>,
    pub vocab: usize,
}

pub fn save(dir: &Path, model: &MdtiModel, cfg: &TrainConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut tensors = Vec::new();
    let mut payload: Vec<u8> = Vec::new();
    for (name, param) in model.params.iter() {
        tensors.push(TensorEntry {
            name: name.clone(),
            rows: param.value.rows(),
            cols: param.value.cols(),
            offset: payload.len(),
        });
        for &v in param.value.data() {
            payload.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let manifest = Manifest {
        dtype: "f32".into(),
        tensors,
        config: cfg.clone(),
        pattern_library: (0..model.lib.patterns.rows())
            .map(|i| model.lib.patterns.row_slice(i).to_vec())
            .collect(),
        vocab: model.vocab,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    fs::write(dir.join("weights.bin"), payload)?;
    Ok(())
}

pub fn load(dir: &Path) -> Result<(MdtiModel, TrainConfig)> {
    let manifest: Manifest =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    if manifest.dtype != "f32" {
        return Err(MdtiError::Config(format!(
            "unsupported checkpoint dtype {}",
            manifest.dtype
        )));
    }
    let payload = fs::read(dir.join("weights.bin"))?;
    let expected: usize = manifest
        .tensors
        .iter()
        .map(|t| t.rows * t.cols * 4)
        .sum();
    if payload.len() != expected {
        return Err(MdtiError::Config(format!(
            "weights.bin holds {} bytes, manifest accounts for {expected}",
            payload.len()
        )));
    }
    let mut params = LayerParams::new();
    for entry in &manifest.tensors {
        let n = entry.rows * entry.cols;
        let end = entry.offset + 4 * n;
        if end > payload.len() {
            return Err(MdtiError::Config(format!(
                "tensor {} overruns weights.bin",
                entry.name
            )));
        }
        let data: Vec<f64> = payload[entry.offset..end]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        params
            .insert(&entry.name, Tensor::new(entry.rows, entry.cols, data)?)
            .map_err(MdtiError::Nn)?;
    }
    let lib_rows: Vec<Vec<f64>> = manifest.pattern_library.clone();
    let lib = PatternLibrary::new(Tensor::from_rows(&lib_rows))?;
    let cfg = manifest.config;
    cfg.validate()?;
    let model = MdtiModel {
        dims: cfg.dims(),
        params,
        lib,
        vocab: manifest.vocab,
    };
    Ok((model, cfg))
}

/// Checks a loaded parameter set against a freshly initialized model for the
/// current config; lists every mismatched or missing tensor.
pub fn check_compatible(loaded: &MdtiModel, reference: &MdtiModel) -> Result<()> {
    let mut mismatched = Vec::new();
    for (name, param) in reference.params.iter() {
        match loaded.params.get(name) {
            Ok(other) if other.value.shape() == param.value.shape() => {}
            Ok(other) => mismatched.push(format!(
                "{name} {:?} vs {:?}",
                other.value.shape(),
                param.value.shape()
            )),
            Err(_) => mismatched.push(format!("{name} missing")),
        }
    }
    for (name, _) in loaded.params.iter() {
        if reference.params.get(name).is_err() {
            mismatched.push(format!("{name} unexpected"));
        }
    }
    if mismatched.is_empty() {
        Ok(())
    } else {
        Err(MdtiError::CheckpointShapes(mismatched.join(", ")))
    }
}
