//! Multimodal interactor: the road sequence queries the fused grid sequence
//! through multi-head cross attention with a learnable relative-offset
//! alignment bias, followed by a residual feed-forward block.

use std::rc::Rc;

use mdti_nn::layers::{ffn, multi_head_attention, AttentionParams, AttnBias};
use mdti_nn::{BoundParams, LayerParams, Tape, Tensor, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::ModelDims;

/// Relative offsets t_q - t_k are clipped to [-MAX_OFFSET, MAX_OFFSET].
pub const MAX_OFFSET: i64 = 8;

pub fn init_interactor_params(params: &mut LayerParams, dims: &ModelDims, rng: &mut ChaCha8Rng) {
    let d = dims.d;
    let reg = |params: &mut LayerParams, name: &str, t: Tensor| {
        params.insert(name, t).expect("unique interactor param");
    };
    for name in ["w_q", "w_k", "w_v", "w_o"] {
        reg(params, &format!("int.attn.{name}"), mdti_nn::init::xavier_uniform(rng, d, d));
    }
    // zero init keeps the vanilla-attention baseline at the start of training
    reg(params, "int.ms", Tensor::zeros(1, (2 * MAX_OFFSET + 1) as usize));
    reg(params, "int.ln.g", Tensor::filled(1, d, 1.0));
    reg(params, "int.ln.b", Tensor::zeros(1, d));
    reg(params, "int.ffn.w1", mdti_nn::init::xavier_uniform(rng, d, 4 * d));
    reg(params, "int.ffn.b1", Tensor::zeros(1, 4 * d));
    reg(params, "int.ffn.w2", mdti_nn::init::xavier_uniform(rng, 4 * d, d));
    reg(params, "int.ffn.b2", Tensor::zeros(1, d));
}

/// Alignment bias matrix: entry (t_q, t_k) = b[clip(t_q - t_k)] shared
/// across heads.
pub fn alignment_bias(p: &BoundParams, l_q: usize, l_k: usize) -> Var {
    let index: Vec<Vec<usize>> = (0..l_q)
        .map(|q| {
            (0..l_k)
                .map(|k| {
                    let off = (q as i64 - k as i64).clamp(-MAX_OFFSET, MAX_OFFSET);
                    (off + MAX_OFFSET) as usize
                })
                .collect()
        })
        .collect();
    p.var("int.ms").gather_matrix(&index)
}

/// Cross attention per the fusion equation; `grid_valid` is true on usable
/// grid keys.
pub fn cross_attend(
    p: &BoundParams,
    dims: &ModelDims,
    x: &Var,
    m: &Var,
    ms: &Var,
    grid_valid: &[bool],
) -> Result<Var> {
    Ok(multi_head_attention(
        x,
        m,
        m,
        &AttentionParams {
            w_q: p.var("int.attn.w_q"),
            w_k: p.var("int.attn.w_k"),
            w_v: p.var("int.attn.w_v"),
            w_o: p.var("int.attn.w_o"),
        },
        dims.heads,
        Some(&AttnBias::Shared(ms)),
        Some(grid_valid),
    )?)
}

pub struct InteractionOutput {
    /// (L+1, D), row 0 is the trajectory-level [CLS].
    pub x_hat: Var,
}

impl InteractionOutput {
    pub fn cls(&self) -> Var {
        self.x_hat.slice_rows(0, 1)
    }
}

/// X̂ = FFN(LN(X + Attn(X, M))).
#[allow(clippy::too_many_arguments)]
pub fn interact(
    _tape: &Rc<Tape>,
    p: &BoundParams,
    dims: &ModelDims,
    x: &Var,
    m: &Var,
    grid_pad: &[bool],
    train: bool,
    rng: &mut impl Rng,
) -> Result<InteractionOutput> {
    let grid_valid: Vec<bool> = grid_pad.iter().map(|&b| !b).collect();
    let ms = alignment_bias(p, x.shape()[0], m.shape()[0]);
    let attn = cross_attend(p, dims, x, m, &ms, &grid_valid)?;
    let summed = x.add(&attn);
    let normed = summed.layer_norm(p.var("int.ln.g"), p.var("int.ln.b"), 1e-5);
    let mut x_hat = ffn(
        &normed,
        p.var("int.ffn.w1"),
        p.var("int.ffn.b1"),
        p.var("int.ffn.w2"),
        p.var("int.ffn.b2"),
    )?;
    if train && dims.dropout > 0.0 {
        x_hat = x_hat.dropout(dims.dropout, train, rng);
    }
    Ok(InteractionOutput { x_hat })
}
