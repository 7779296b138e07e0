//! AdamW with decoupled weight decay and global-norm gradient clipping.

use std::collections::BTreeMap;

use crate::params::LayerParams;
use crate::tensor::Tensor;

pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    state: BTreeMap<String, (Tensor, Tensor)>, // (m, v)
}

impl AdamW {
    pub fn new(weight_decay: f64) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            state: BTreeMap::new(),
        }
    }

    /// One optimizer step over all parameters whose name passes `trainable`.
    pub fn step(
        &mut self,
        params: &mut LayerParams,
        lr: f64,
        trainable: impl Fn(&str) -> bool,
    ) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (name, p) in params.iter_mut() {
            if !trainable(name) {
                continue;
            }
            let (m, v) = self
                .state
                .entry(name.clone())
                .or_insert_with(|| {
                    (
                        Tensor::zeros(p.value.rows(), p.value.cols()),
                        Tensor::zeros(p.value.rows(), p.value.cols()),
                    )
                });
            let (b1, b2, eps, wd) = (self.beta1, self.beta2, self.eps, self.weight_decay);
            for k in 0..p.value.len() {
                let g = p.grad.data()[k];
                let mk = b1 * m.data()[k] + (1.0 - b1) * g;
                let vk = b2 * v.data()[k] + (1.0 - b2) * g * g;
                m.data_mut()[k] = mk;
                v.data_mut()[k] = vk;
                let mhat = mk / bc1;
                let vhat = vk / bc2;
                let w = p.value.data()[k];
                p.value.data_mut()[k] = w - lr * (mhat / (vhat.sqrt() + eps) + wd * w);
            }
        }
    }
}

/// Scales all gradients so the global L2 norm does not exceed `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_global_norm(params: &mut LayerParams, max_norm: f64) -> f64 {
    let total: f64 = params
        .iter()
        .map(|(_, p)| p.grad.frobenius_sq())
        .sum::<f64>()
        .sqrt();
    if total > max_norm && total > 0.0 {
        let s = max_norm / total;
        for (_, p) in params.iter_mut() {
            for g in p.grad.data_mut() {
                *g *= s;
            }
        }
    }
    total
}
