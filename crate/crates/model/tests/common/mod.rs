#![allow(dead_code)]

use mdti_model::ModelDims;
use mdti_nn::Tensor;

/// Small dims used by most toy tests.
pub fn toy_dims() -> ModelDims {
    ModelDims {
        d: 8,
        gat_hidden: 8,
        heads: 4,
        t_segments: 4,
        k_patterns: 4,
        d_lm: 8,
        road_layers: 2,
        dropout: 0.0,
    }
}

fn leaky_relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.2 * x
    }
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

/// Dense literal GAT oracle: per head, e_ij = LeakyReLU(a_src.Wh_i +
/// a_dst.Wh_j) softmax-normalized over {i} u N(i), aggregation, then ELU per
/// head and concat, or head average then ELU.
pub fn gat_oracle(
    h: &Tensor,
    adj: &[Vec<bool>],
    w: &Tensor,
    a_src: &Tensor,
    a_dst: &Tensor,
    heads: usize,
    average: bool,
) -> Tensor {
    let n = h.rows();
    let hw = w.cols();
    let fh = hw / heads;
    let wh = h.matmul(w);
    let mut merged = Tensor::zeros(n, if average { fh } else { hw });
    for hd in 0..heads {
        let cols = hd * fh..(hd + 1) * fh;
        let score = |node: usize, a: &Tensor| -> f64 {
            cols.clone()
                .map(|c| a.get(0, c) * wh.get(node, c))
                .sum::<f64>()
        };
        for i in 0..n {
            let neigh: Vec<usize> = (0..n).filter(|&j| adj[i][j]).collect();
            let e: Vec<f64> = neigh
                .iter()
                .map(|&j| leaky_relu(score(i, a_src) + score(j, a_dst)))
                .collect();
            let mx = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = e.iter().map(|v| (v - mx).exp()).sum();
            for (f, c) in cols.clone().enumerate() {
                let agg: f64 = neigh
                    .iter()
                    .zip(&e)
                    .map(|(&j, &ev)| (ev - mx).exp() / z * wh.get(j, c))
                    .sum();
                if average {
                    let prev = merged.get(i, f);
                    merged.set(i, f, prev + agg / heads as f64);
                } else {
                    merged.set(i, c, elu(agg));
                }
            }
        }
    }
    if average {
        merged = merged.map(elu);
    }
    merged
}
