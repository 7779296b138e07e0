//! Self-supervised objectives (bidirectional InfoNCE and masked segment
//! prediction), the travel-time head and the regression metrics.

use mdti_nn::layers::linear;
use mdti_nn::{BoundParams, LayerParams, Tensor, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ModelError, Result};
use crate::ModelDims;

/// CLIP-style temperature init.
pub const TAU_INIT: f64 = 0.07;
pub const MASK_RATE: f64 = 0.15;

pub fn init_objective_params(
    params: &mut LayerParams,
    dims: &ModelDims,
    vocab: usize,
    rng: &mut ChaCha8Rng,
) {
    let d = dims.d;
    let reg = |params: &mut LayerParams, name: &str, t: Tensor| {
        params.insert(name, t).expect("unique objective param");
    };
    reg(params, "obj.log_tau", Tensor::scalar(TAU_INIT.ln()));
    reg(params, "mlm.ln.g", Tensor::filled(1, d, 1.0));
    reg(params, "mlm.ln.b", Tensor::zeros(1, d));
    reg(params, "mlm.w", mdti_nn::init::xavier_uniform(rng, d, vocab));
    reg(params, "mlm.b", Tensor::zeros(1, vocab));
    reg(params, "tte.w1", mdti_nn::init::xavier_uniform(rng, d, d));
    reg(params, "tte.b1", Tensor::zeros(1, d));
    reg(params, "tte.w2", mdti_nn::init::xavier_uniform(rng, d, 1));
    reg(params, "tte.b2", Tensor::zeros(1, 1));
}

/// Bidirectional InfoNCE over L2-normalized [CLS] rows g and r (both [N, D])
/// with temperature exp(log_tau).
pub fn info_nce(g: &Var, r: &Var, log_tau: &Var) -> Result<Var> {
    let n = g.shape()[0];
    if r.shape() != g.shape() {
        return Err(ModelError::Config(format!(
            "info_nce shapes {:?} vs {:?}",
            g.shape(),
            r.shape()
        )));
    }
    let gn = g.l2_normalize_rows(1e-12);
    let rn = r.l2_normalize_rows(1e-12);
    let inv_tau = log_tau.neg().exp();
    let logits = gn.matmul(&rn.transpose()).mul_scalar(&inv_tau);
    let diag: Vec<usize> = (0..n).collect();
    let g2r = logits.log_softmax().pick_cols(&diag).mean().neg();
    let r2g = logits.transpose().log_softmax().pick_cols(&diag).mean().neg();
    Ok(g2r.add(&r2g).scale(0.5))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlmBatch {
    /// Indices into the real-token range [0, L).
    pub positions: Vec<usize>,
    /// Original segment ids at those positions.
    pub targets: Vec<usize>,
}

/// Masks each real token independently with probability `rate`; if none is
/// selected, one position is force-masked uniformly. [CLS]/[PAD] slots are
/// outside the sampled range by construction.
pub fn mask_sequence(segments: &[usize], rate: f64, rng: &mut impl Rng) -> Result<MlmBatch> {
    if segments.is_empty() {
        return Err(ModelError::Config("empty sequence to mask".into()));
    }
    let mut positions: Vec<usize> = (0..segments.len())
        .filter(|_| rng.gen::<f64>() < rate)
        .collect();
    if positions.is_empty() {
        positions.push(rng.gen_range(0..segments.len()));
    }
    let targets = positions.iter().map(|&i| segments[i]).collect();
    Ok(MlmBatch { positions, targets })
}

/// Mean negative log-likelihood of the original ids at masked positions.
/// `logits` has one row per real token (no [CLS]/[PAD] rows).
pub fn mlm_loss(logits: &Var, batch: &MlmBatch) -> Result<Var> {
    if batch.positions.is_empty() {
        return Err(ModelError::NoMaskedPositions);
    }
    let lp = logits.log_softmax();
    Ok(lp
        .gather_rows(&batch.positions)
        .pick_cols(&batch.targets)
        .mean()
        .neg())
}

/// Vocabulary logits of the MLM head over interactor outputs: layer norm
/// (keeps the positional-encoding component from dominating the readout)
/// then a linear map to the segment vocabulary.
pub fn mlm_logits(p: &BoundParams, token_states: &Var) -> Result<Var> {
    let normed = token_states.layer_norm(p.var("mlm.ln.g"), p.var("mlm.ln.b"), 1e-5);
    Ok(linear(&normed, p.var("mlm.w"), Some(p.var("mlm.b")))?)
}

pub fn total_loss(l_cl: &Var, l_mlm: &Var, weights: (f64, f64)) -> Var {
    l_cl.scale(weights.0).add(&l_mlm.scale(weights.1))
}

/// 2-layer MLP D -> D -> 1 with a softplus output; predictions are minutes.
pub fn tte_head(p: &BoundParams, cls: &Var) -> Result<Var> {
    let h = linear(cls, p.var("tte.w1"), Some(p.var("tte.b1")))?.relu();
    Ok(linear(&h, p.var("tte.w2"), Some(p.var("tte.b2")))?.softplus())
}

/// MAE between a scalar prediction and the label.
pub fn tte_loss(pred: &Var, label: f64) -> Var {
    pred.sub(&pred.tape().constant(Tensor::scalar(label)))
        .abs()
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
    pub mape: f64,
}

pub fn metrics(preds: &[f64], targets: &[f64]) -> Result<Metrics> {
    if preds.is_empty() || preds.len() != targets.len() {
        return Err(ModelError::Config(format!(
            "metrics over {} preds vs {} targets",
            preds.len(),
            targets.len()
        )));
    }
    let n = preds.len() as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut pct_sum = 0.0;
    for (&p, &t) in preds.iter().zip(targets) {
        if t <= 0.0 {
            return Err(ModelError::NonPositiveTarget(t));
        }
        let d = p - t;
        abs_sum += d.abs();
        sq_sum += d * d;
        pct_sum += d.abs() / t;
    }
    Ok(Metrics {
        mae: abs_sum / n,
        rmse: (sq_sum / n).sqrt(),
        mape: pct_sum / n,
    })
}
