//! Dynamic FusionAlign: project GPS semantic embeddings into grid space,
//! align lengths by prefix truncation or zero padding, and add them to the
//! grid sequence residually. The [CLS] row never receives a GPS residual.

use std::rc::Rc;

use mdti_nn::layers::linear;
use mdti_nn::{BoundParams, LayerParams, Tape, Tensor, Var};
use rand_chacha::ChaCha8Rng;

use crate::error::{ModelError, Result};
use crate::ModelDims;

pub fn init_fusion_params(params: &mut LayerParams, dims: &ModelDims, rng: &mut ChaCha8Rng) {
    params
        .insert("fuse.w", mdti_nn::init::xavier_uniform(rng, dims.d_lm, dims.d))
        .expect("unique fusion param");
    params
        .insert("fuse.b", Tensor::zeros(1, dims.d))
        .expect("unique fusion param");
}

pub fn project_gps(z: &Var, p: &BoundParams) -> Result<Var> {
    Ok(linear(z, p.var("fuse.w"), Some(p.var("fuse.b")))?)
}

/// Keeps the first T rows or appends zero rows; the mask is true exactly on
/// appended slots.
pub fn align_length(tape: &Rc<Tape>, z: &Var, t: usize) -> (Var, Vec<bool>) {
    let n = z.shape()[0];
    let d = z.shape()[1];
    if n == t {
        (z.clone(), vec![false; t])
    } else if n > t {
        (z.slice_rows(0, t), vec![false; t])
    } else {
        let pad = tape.constant(Tensor::zeros(t - n, d));
        let mut mask = vec![false; n];
        mask.extend(std::iter::repeat(true).take(t - n));
        let aligned = if n == 0 {
            pad
        } else {
            Var::concat_rows(&[z.clone(), pad])
        };
        (aligned, mask)
    }
}

/// G̃_t = G_t + z_t for t = 1..T; row 0 ([CLS]) passes through unchanged.
pub fn residual_fuse(g: &Var, z: &Var) -> Result<Var> {
    let [rows, d] = g.shape();
    if z.shape() != [rows - 1, d] {
        return Err(ModelError::Config(format!(
            "residual_fuse shapes {:?} vs {:?}",
            g.shape(),
            z.shape()
        )));
    }
    let cls = g.slice_rows(0, 1);
    let fused = g.slice_rows(1, rows).add(z);
    Ok(Var::concat_rows(&[cls, fused]))
}

/// GPS semantic rows -> grid-space residual -> aligned fusion with G.
pub fn fuse(
    tape: &Rc<Tape>,
    p: &BoundParams,
    g: &Var,
    z_lm: &Var,
    t: usize,
) -> Result<(Var, Vec<bool>)> {
    let z = project_gps(z_lm, p)?;
    let (aligned, pad_mask) = align_length(tape, &z, t);
    Ok((residual_fuse(g, &aligned)?, pad_mask))
}
