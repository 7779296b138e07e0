//! Parameterized layers built from tape primitives.

use crate::autograd::Var;
use crate::error::{NnError, Result};
use crate::tensor::BoolMat;

/// y = x W (+ b). Shape-checked entry point for every linear projection.
pub fn linear(x: &Var, weight: &Var, bias: Option<&Var>) -> Result<Var> {
    let xs = x.shape();
    let ws = weight.shape();
    if xs[1] != ws[0] {
        return Err(NnError::Shape {
            op: "linear",
            lhs: format!("{xs:?}"),
            rhs: format!("{ws:?}"),
        });
    }
    let y = x.matmul(weight);
    match bias {
        Some(b) => {
            let bs = b.shape();
            if bs != [1, ws[1]] {
                return Err(NnError::Shape {
                    op: "linear bias",
                    lhs: format!("{bs:?}"),
                    rhs: format!("[1, {}]", ws[1]),
                });
            }
            Ok(y.add_row(b))
        }
        None => Ok(y),
    }
}

/// Row-wise softmax over unmasked positions; masked entries are exactly 0.
/// Errors on a fully-masked row.
pub fn masked_softmax(scores: &Var, mask: Option<&BoolMat>) -> Result<Var> {
    let [r, c] = scores.shape();
    if let Some(m) = mask {
        if [m.rows(), m.cols()] != [r, c] {
            return Err(NnError::Shape {
                op: "masked_softmax",
                lhs: format!("[{r}, {c}]"),
                rhs: format!("[{}, {}]", m.rows(), m.cols()),
            });
        }
        for i in 0..r {
            if m.row_count_true(i) == 0 {
                return Err(NnError::FullyMasked(i));
            }
        }
    }
    Ok(scores.softmax_masked(mask))
}

/// Projection weights of one attention block, each [d, d].
pub struct AttentionParams<'a> {
    pub w_q: &'a Var,
    pub w_k: &'a Var,
    pub w_v: &'a Var,
    pub w_o: &'a Var,
}

/// Additive pre-softmax bias, either shared across heads or one per head.
pub enum AttnBias<'a> {
    Shared(&'a Var),
    PerHead(&'a [Var]),
}

/// Multi-head scaled dot-product attention with optional additive bias and
/// key mask. Q [Lq,d], K/V [Lk,d] -> [Lq,d].
pub fn multi_head_attention(
    q: &Var,
    k: &Var,
    v: &Var,
    params: &AttentionParams,
    heads: usize,
    bias: Option<&AttnBias>,
    key_mask: Option<&[bool]>,
) -> Result<Var> {
    let d = q.shape()[1];
    if heads == 0 || d % heads != 0 {
        return Err(NnError::Config(format!(
            "model dim {d} not divisible by {heads} heads"
        )));
    }
    if k.shape()[1] != d || v.shape()[1] != d || k.shape()[0] != v.shape()[0] {
        return Err(NnError::Shape {
            op: "multi_head_attention",
            lhs: format!("{:?}", k.shape()),
            rhs: format!("{:?}", v.shape()),
        });
    }
    let lq = q.shape()[0];
    let lk = k.shape()[0];
    if let Some(b) = bias {
        let check = |bv: &Var| -> Result<()> {
            if bv.shape() != [lq, lk] {
                return Err(NnError::Shape {
                    op: "attention bias",
                    lhs: format!("{:?}", bv.shape()),
                    rhs: format!("[{lq}, {lk}]"),
                });
            }
            Ok(())
        };
        match b {
            AttnBias::Shared(bv) => check(bv)?,
            AttnBias::PerHead(bs) => {
                if bs.len() != heads {
                    return Err(NnError::Config(format!(
                        "per-head bias count {} != heads {heads}",
                        bs.len()
                    )));
                }
                for bv in *bs {
                    check(bv)?;
                }
            }
        }
    }
    let mask = key_mask.map(|km| {
        assert_eq!(km.len(), lk, "key mask length");
        BoolMat::from_key_mask(lq, km)
    });

    let qp = linear(q, params.w_q, None)?;
    let kp = linear(k, params.w_k, None)?;
    let vp = linear(v, params.w_v, None)?;
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let mut head_outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let (s, e) = (h * dh, (h + 1) * dh);
        let qh = qp.slice_cols(s, e);
        let kh = kp.slice_cols(s, e);
        let vh = vp.slice_cols(s, e);
        let mut scores = qh.matmul(&kh.transpose()).scale(scale);
        if let Some(b) = bias {
            let bv = match b {
                AttnBias::Shared(bv) => *bv,
                AttnBias::PerHead(bs) => &bs[h],
            };
            scores = scores.add(bv);
        }
        let attn = masked_softmax(&scores, mask.as_ref())?;
        head_outs.push(attn.matmul(&vh));
    }
    let ctx = Var::concat_cols(&head_outs);
    linear(&ctx, params.w_o, None)
}

/// Two-layer position-wise feed-forward block with ReLU.
pub fn ffn(x: &Var, w1: &Var, b1: &Var, w2: &Var, b2: &Var) -> Result<Var> {
    let h = linear(x, w1, Some(b1))?.relu();
    linear(&h, w2, Some(b2))
}

/// How per-head outputs of a GAT layer are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadMerge {
    /// ELU per head, then column concatenation (hidden layers).
    Concat,
    /// Average heads, then ELU (output layer).
    Average,
}

/// Weights of one GAT layer: `w` [F_in, heads*F_h] and the attention vector
/// split into source/destination halves, each [1, heads*F_h].
pub struct GatParams<'a> {
    pub w: &'a Var,
    pub a_src: &'a Var,
    pub a_dst: &'a Var,
}

pub const GAT_LEAKY_SLOPE: f64 = 0.2;

/// One graph-attention layer. Attention over each node's neighborhood
/// (adjacency rows, self-loops included) is softmax-normalized; the
/// per-neighbor score is LeakyReLU(a_src . W h_i + a_dst . W h_j).
pub fn gat_layer(
    h: &Var,
    adj: &BoolMat,
    params: &GatParams,
    heads: usize,
    merge: HeadMerge,
) -> Result<Var> {
    let n = h.shape()[0];
    if adj.rows() != n || adj.cols() != n {
        return Err(NnError::Shape {
            op: "gat_layer adjacency",
            lhs: format!("[{n}, {n}]"),
            rhs: format!("[{}, {}]", adj.rows(), adj.cols()),
        });
    }
    for i in 0..n {
        if !adj.get(i, i) {
            return Err(NnError::Config(format!("node {i} lacks a self-loop")));
        }
    }
    let hw = params.w.shape()[1];
    if heads == 0 || hw % heads != 0 {
        return Err(NnError::Config(format!(
            "GAT width {hw} not divisible by {heads} heads"
        )));
    }
    let fh = hw / heads;
    if params.a_src.shape() != [1, hw] || params.a_dst.shape() != [1, hw] {
        return Err(NnError::Shape {
            op: "gat_layer attention vector",
            lhs: format!("{:?}", params.a_src.shape()),
            rhs: format!("[1, {hw}]"),
        });
    }

    let wh = linear(h, params.w, None)?; // [n, heads*fh]
    let mut head_outs = Vec::with_capacity(heads);
    for hd in 0..heads {
        let (s, e) = (hd * fh, (hd + 1) * fh);
        let whh = wh.slice_cols(s, e); // [n, fh]
        let asrc = params.a_src.slice_cols(s, e).transpose(); // [fh,1]
        let adst = params.a_dst.slice_cols(s, e).transpose();
        let si = whh.matmul(&asrc); // [n,1]
        let sj = whh.matmul(&adst); // [n,1]
        // e_ij = s_i + s_j over neighborhood
        let scores = si
            .broadcast_col(n)
            .add(&sj.transpose().broadcast_row(n))
            .leaky_relu(GAT_LEAKY_SLOPE);
        let alpha = masked_softmax(&scores, Some(adj))?;
        let agg = alpha.matmul(&whh);
        head_outs.push(match merge {
            HeadMerge::Concat => agg.elu(),
            HeadMerge::Average => agg,
        });
    }
    match merge {
        HeadMerge::Concat => Ok(Var::concat_cols(&head_outs)),
        HeadMerge::Average => {
            let mut acc = head_outs[0].clone();
            for ho in &head_outs[1..] {
                acc = acc.add(ho);
            }
            Ok(acc.scale(1.0 / heads as f64).elu())
        }
    }
}
