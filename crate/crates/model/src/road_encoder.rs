//! Road modality encoder: GAT over the road graph, then a Transformer stack
//! over the segment sequence with [PAD]/[CLS]/[MASK] tokens, temporal, type
//! and positional embeddings, and a type-derived attention prior added to
//! every layer's pre-softmax scores.

use std::rc::Rc;

use mdti_nn::layers::{
    ffn, gat_layer, linear, multi_head_attention, AttentionParams, AttnBias, GatParams, HeadMerge,
};
use mdti_nn::{BoolMat, BoundParams, LayerParams, Tape, Tensor, Var};
use mdti_traj::{RoadNetwork, RoadTrajectory, RoadType};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ModelError, Result};
use crate::ModelDims;

pub const WEEK_VOCAB: usize = 7;
/// Minute-of-day bucketed to 15-minute slots.
pub const MINUTE_BUCKETS: usize = 96;
/// Road types plus one special row for [CLS]/[PAD]/[MASK] slots.
pub const TYPE_VOCAB: usize = RoadType::COUNT + 1;
pub const SPECIAL_TYPE: usize = RoadType::COUNT;

/// Raw node features: [length_m / max length, one-hot type, out-deg / 8,
/// in-deg / 8], all kept in O(1) ranges.
pub const ROAD_FEATURES: usize = 3 + RoadType::COUNT;

/// Degree normalizer (few urban junctions exceed 8 incident segments).
pub const DEGREE_NORM: f64 = 8.0;

pub fn road_node_features(net: &RoadNetwork) -> Tensor {
    let max_len = net
        .segments
        .iter()
        .map(|s| s.length_m)
        .fold(1e-12, f64::max);
    Tensor::from_fn(net.segments.len(), ROAD_FEATURES, |i, j| {
        let seg = &net.segments[i];
        match j {
            0 => seg.length_m / max_len,
            j if j <= RoadType::COUNT => (seg.road_type.index() == j - 1) as u8 as f64,
            j if j == RoadType::COUNT + 1 => net.out_degree(i) as f64 / DEGREE_NORM,
            _ => net.in_degree(i) as f64 / DEGREE_NORM,
        }
    })
}

/// Attention neighborhoods: directed edges plus self-loops.
pub fn road_adjacency(net: &RoadNetwork) -> BoolMat {
    let n = net.segments.len();
    let mut adj = BoolMat::new(n, n, false);
    for i in 0..n {
        adj.set(i, i, true);
    }
    for &(i, j) in &net.edges {
        adj.set(i, j, true);
    }
    adj
}

pub fn init_road_params(
    params: &mut LayerParams,
    dims: &ModelDims,
    n_seg: usize,
    rng: &mut ChaCha8Rng,
) {
    let h = dims.gat_hidden;
    let d = dims.d;
    let reg = |params: &mut LayerParams, name: &str, t: Tensor| {
        params.insert(name, t).expect("unique road param");
    };
    reg(params, "road.in_proj.w", mdti_nn::init::xavier_uniform(rng, ROAD_FEATURES, h));
    reg(params, "road.in_proj.b", Tensor::zeros(1, h));
    reg(params, "road.node_emb", mdti_nn::init::normal(rng, n_seg, d, 1.0));
    reg(params, "road.gat1.w", mdti_nn::init::xavier_uniform(rng, h, h));
    reg(params, "road.gat1.a_src", mdti_nn::init::normal(rng, 1, h, 0.1));
    reg(params, "road.gat1.a_dst", mdti_nn::init::normal(rng, 1, h, 0.1));
    reg(params, "road.gat2.w", mdti_nn::init::xavier_uniform(rng, h, dims.heads * d));
    reg(params, "road.gat2.a_src", mdti_nn::init::normal(rng, 1, dims.heads * d, 0.1));
    reg(params, "road.gat2.a_dst", mdti_nn::init::normal(rng, 1, dims.heads * d, 0.1));
    reg(params, "road.e_week", mdti_nn::init::normal(rng, WEEK_VOCAB, d, 0.02));
    reg(params, "road.e_minute", mdti_nn::init::normal(rng, MINUTE_BUCKETS, d, 0.02));
    reg(params, "road.e_type", mdti_nn::init::normal(rng, TYPE_VOCAB, d, 0.02));
    reg(params, "road.cls", mdti_nn::init::normal(rng, 1, d, 0.02));
    reg(params, "road.pad", Tensor::zeros(1, d));
    reg(params, "road.mask", mdti_nn::init::normal(rng, 1, d, 0.02));
    for l in 0..dims.road_layers {
        for name in ["w_q", "w_k", "w_v", "w_o"] {
            reg(params, &format!("road.l{l}.attn.{name}"), mdti_nn::init::xavier_uniform(rng, d, d));
        }
        reg(params, &format!("road.l{l}.type.w_q"), mdti_nn::init::xavier_uniform(rng, d, d));
        reg(params, &format!("road.l{l}.type.w_k"), mdti_nn::init::xavier_uniform(rng, d, d));
        reg(params, &format!("road.l{l}.ln1.g"), Tensor::filled(1, d, 1.0));
        reg(params, &format!("road.l{l}.ln1.b"), Tensor::zeros(1, d));
        reg(params, &format!("road.l{l}.ln2.g"), Tensor::filled(1, d, 1.0));
        reg(params, &format!("road.l{l}.ln2.b"), Tensor::zeros(1, d));
        reg(params, &format!("road.l{l}.ffn.w1"), mdti_nn::init::xavier_uniform(rng, d, 4 * d));
        reg(params, &format!("road.l{l}.ffn.b1"), Tensor::zeros(1, 4 * d));
        reg(params, &format!("road.l{l}.ffn.w2"), mdti_nn::init::xavier_uniform(rng, 4 * d, d));
        reg(params, &format!("road.l{l}.ffn.b2"), Tensor::zeros(1, d));
    }
    reg(params, "road.out.w", mdti_nn::init::xavier_uniform(rng, d, d));
    reg(params, "road.out.b", Tensor::zeros(1, d));
}

/// Input projection followed by two GAT layers over the directed topology.
pub fn road_gat(tape: &Rc<Tape>, p: &BoundParams, dims: &ModelDims, net: &RoadNetwork) -> Result<Var> {
    let feats = tape.constant(road_node_features(net));
    let adj = road_adjacency(net);
    let x = linear(&feats, p.var("road.in_proj.w"), Some(p.var("road.in_proj.b")))?;
    let h1 = gat_layer(
        &x,
        &adj,
        &GatParams {
            w: p.var("road.gat1.w"),
            a_src: p.var("road.gat1.a_src"),
            a_dst: p.var("road.gat1.a_dst"),
        },
        dims.heads,
        HeadMerge::Concat,
    )?;
    Ok(gat_layer(
        &h1,
        &adj,
        &GatParams {
            w: p.var("road.gat2.w"),
            a_src: p.var("road.gat2.a_src"),
            a_dst: p.var("road.gat2.a_dst"),
        },
        dims.heads,
        HeadMerge::Average,
    )?)
}

pub fn week_index(ts: f64) -> usize {
    ((ts as i64).div_euclid(86_400).rem_euclid(7)) as usize
}

pub fn minute_bucket(ts: f64) -> usize {
    (((ts as i64).rem_euclid(86_400) / 60) / 15) as usize
}

/// Fixed sinusoidal positional encoding, one row per sequence position.
pub fn positional_encoding(len: usize, d: usize) -> Tensor {
    Tensor::from_fn(len, d, |pos, j| {
        let rate = (pos as f64) / 10_000f64.powf((2 * (j / 2)) as f64 / d as f64);
        if j % 2 == 0 {
            rate.sin()
        } else {
            rate.cos()
        }
    })
}

/// Token inputs for one trajectory: [CLS] then one slot per visited segment,
/// optionally padded to a fixed length. Each real slot sums the segment's GAT
/// embedding, a learnable per-segment identity embedding, calendar and type
/// embeddings and the positional encoding; the identity term keeps tokens
/// distinguishable on near-regular networks whose structural features repeat
/// across segments. Masked slots keep only the [MASK] embedding plus the
/// positional encoding.
pub struct SequenceInputs {
    pub x: Var,
    /// Row per slot of the type-embedding table (special row for CLS/PAD).
    pub type_emb: Var,
    pub type_ids: Vec<usize>,
    pub pad_mask: Vec<bool>,
}

pub fn build_sequence_inputs(
    tape: &Rc<Tape>,
    p: &BoundParams,
    dims: &ModelDims,
    traj: &RoadTrajectory,
    net: &RoadNetwork,
    g_emb: &Var,
    mask_positions: Option<&[usize]>,
    pad_to: Option<usize>,
) -> Result<SequenceInputs> {
    let n_seg = net.segments.len();
    let l = traj.segments.len();
    let seq_len = pad_to.map_or(l + 1, |t| {
        assert!(t >= l + 1, "pad_to shorter than sequence");
        t
    });
    for &v in &traj.segments {
        if v >= n_seg {
            return Err(ModelError::SegmentOutOfRange(v, n_seg));
        }
    }
    let masked = |t: usize| mask_positions.is_some_and(|m| m.contains(&t));

    let pe = tape.constant(positional_encoding(seq_len, dims.d));
    let mut rows = Vec::with_capacity(seq_len);
    let mut type_ids = Vec::with_capacity(seq_len);
    let mut pad_mask = Vec::with_capacity(seq_len);

    rows.push(p.var("road.cls").add(&pe.slice_rows(0, 1)));
    type_ids.push(SPECIAL_TYPE);
    pad_mask.push(false);

    let e_week = p.var("road.e_week");
    let e_minute = p.var("road.e_minute");
    for (t, (&v, &ts)) in traj.segments.iter().zip(&traj.timestamps).enumerate() {
        let pos = pe.slice_rows(t + 1, t + 2);
        let row = if masked(t) {
            p.var("road.mask").add(&pos)
        } else {
            g_emb
                .slice_rows(v, v + 1)
                .add(&p.var("road.node_emb").slice_rows(v, v + 1))
                .add(&e_week.slice_rows(week_index(ts), week_index(ts) + 1))
                .add(&e_minute.slice_rows(minute_bucket(ts), minute_bucket(ts) + 1))
                .add(&p.var("road.e_type").slice_rows(
                    net.segments[v].road_type.index(),
                    net.segments[v].road_type.index() + 1,
                ))
                .add(&pos)
        };
        rows.push(row);
        type_ids.push(if masked(t) {
            SPECIAL_TYPE
        } else {
            net.segments[v].road_type.index()
        });
        pad_mask.push(false);
    }
    for t in l + 1..seq_len {
        rows.push(p.var("road.pad").add(&pe.slice_rows(t, t + 1)));
        type_ids.push(SPECIAL_TYPE);
        pad_mask.push(true);
    }

    let type_emb = p.var("road.e_type").gather_rows(&type_ids);
    Ok(SequenceInputs {
        x: Var::concat_rows(&rows),
        type_emb,
        type_ids,
        pad_mask,
    })
}

/// One Transformer layer whose attention scores receive a per-head prior B
/// computed from the type embeddings with this layer's type projections.
pub fn type_bias_layer(
    p: &BoundParams,
    dims: &ModelDims,
    layer: usize,
    x: &Var,
    type_emb: &Var,
    pad_mask: &[bool],
    train: bool,
    rng: &mut impl Rng,
) -> Result<Var> {
    let d = dims.d;
    let dh = d / dims.heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let qt = linear(type_emb, p.var(&format!("road.l{layer}.type.w_q")), None)?;
    let kt = linear(type_emb, p.var(&format!("road.l{layer}.type.w_k")), None)?;
    let biases: Vec<Var> = (0..dims.heads)
        .map(|h| {
            let (s, e) = (h * dh, (h + 1) * dh);
            qt.slice_cols(s, e)
                .matmul(&kt.slice_cols(s, e).transpose())
                .scale(scale)
        })
        .collect();

    let valid: Vec<bool> = pad_mask.iter().map(|&m| !m).collect();
    let normed = x.layer_norm(
        p.var(&format!("road.l{layer}.ln1.g")),
        p.var(&format!("road.l{layer}.ln1.b")),
        1e-5,
    );
    let attn = multi_head_attention(
        &normed,
        &normed,
        &normed,
        &AttentionParams {
            w_q: p.var(&format!("road.l{layer}.attn.w_q")),
            w_k: p.var(&format!("road.l{layer}.attn.w_k")),
            w_v: p.var(&format!("road.l{layer}.attn.w_v")),
            w_o: p.var(&format!("road.l{layer}.attn.w_o")),
        },
        dims.heads,
        Some(&AttnBias::PerHead(&biases)),
        Some(&valid),
    )?;
    let attn = if train && dims.dropout > 0.0 {
        attn.dropout(dims.dropout, train, rng)
    } else {
        attn
    };
    let h = x.add(&attn);
    let normed2 = h.layer_norm(
        p.var(&format!("road.l{layer}.ln2.g")),
        p.var(&format!("road.l{layer}.ln2.b")),
        1e-5,
    );
    let f = ffn(
        &normed2,
        p.var(&format!("road.l{layer}.ffn.w1")),
        p.var(&format!("road.l{layer}.ffn.b1")),
        p.var(&format!("road.l{layer}.ffn.w2")),
        p.var(&format!("road.l{layer}.ffn.b2")),
    )?;
    let f = if train && dims.dropout > 0.0 {
        f.dropout(dims.dropout, train, rng)
    } else {
        f
    };
    Ok(h.add(&f))
}

pub struct RoadEncoding {
    /// (L+1, D) with [CLS] at row 0.
    pub r: Var,
    pub pad_mask: Vec<bool>,
    pub type_ids: Vec<usize>,
}

/// Full road branch: GAT node embeddings, token assembly, the Transformer
/// stack and an output projection to D.
#[allow(clippy::too_many_arguments)]
pub fn encode_road(
    tape: &Rc<Tape>,
    p: &BoundParams,
    dims: &ModelDims,
    traj: &RoadTrajectory,
    net: &RoadNetwork,
    g_emb: &Var,
    mask_positions: Option<&[usize]>,
    pad_to: Option<usize>,
    train: bool,
    rng: &mut impl Rng,
) -> Result<RoadEncoding> {
    let inputs = build_sequence_inputs(tape, p, dims, traj, net, g_emb, mask_positions, pad_to)?;
    let mut x = inputs.x;
    for layer in 0..dims.road_layers {
        x = type_bias_layer(
            p,
            dims,
            layer,
            &x,
            &inputs.type_emb,
            &inputs.pad_mask,
            train,
            rng,
        )?;
    }
    let r = linear(&x, p.var("road.out.w"), Some(p.var("road.out.b")))?;
    Ok(RoadEncoding {
        r,
        pad_mask: inputs.pad_mask,
        type_ids: inputs.type_ids,
    })
}
