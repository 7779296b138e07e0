//! Full model assembly: one parameter set spanning all encoder groups, the
//! per-sample forward pass and the batch objectives.

use std::rc::Rc;

use mdti_model::fusion::{fuse, init_fusion_params};
use mdti_model::gps_encoder::{
    chunk, fit_pattern_library, gps_semantic, motion_matrix, HashEmbedder, PatternLibrary,
    TextEmbedder,
};
use mdti_model::grid_encoder::{encode_grid, init_grid_params};
use mdti_model::interactor::{init_interactor_params, interact};
use mdti_model::objectives::{
    info_nce, init_objective_params, mask_sequence, mlm_logits, mlm_loss, total_loss, tte_head,
    MASK_RATE,
};
use mdti_model::road_encoder::{encode_road, init_road_params, road_gat};
use mdti_model::ModelDims;
use mdti_nn::{BoundParams, LayerParams, Tape, Tensor, Var};
use mdti_traj::{GridSpec, RoadNetwork, TrajectorySample};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

/// Stub-embedder seed; fixed so prompt embeddings are a pure function of the
/// prompt text.
pub const EMBEDDER_SEED: u64 = 0x4d44_5449;

pub struct MdtiModel {
    pub dims: ModelDims,
    pub params: LayerParams,
    pub lib: PatternLibrary,
    /// Road-segment vocabulary size (MLM classes).
    pub vocab: usize,
}

impl MdtiModel {
    pub fn new(dims: ModelDims, vocab: usize, lib: PatternLibrary, seed: u64) -> Result<Self> {
        use rand::SeedableRng;
        dims.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = LayerParams::new();
        init_grid_params(&mut params, &dims, &mut rng);
        init_fusion_params(&mut params, &dims, &mut rng);
        init_road_params(&mut params, &dims, vocab, &mut rng);
        init_interactor_params(&mut params, &dims, &mut rng);
        init_objective_params(&mut params, &dims, vocab, &mut rng);
        Ok(MdtiModel {
            dims,
            params,
            lib,
            vocab,
        })
    }

    pub fn embedder(&self) -> HashEmbedder {
        HashEmbedder::new(self.dims.d_lm, EMBEDDER_SEED)
    }
}

/// Fits the pattern library on the training split's chunks.
pub fn fit_library(
    train: &[TrajectorySample],
    spec: &GridSpec,
    k: usize,
    seed: u64,
) -> Result<PatternLibrary> {
    let mut chunks = Vec::new();
    for s in train {
        chunks.extend(chunk(&motion_matrix(&s.gps, spec.bbox))?);
    }
    Ok(fit_pattern_library(&chunks, k, 20, seed)?)
}

/// Precomputed GPS semantic embeddings, one tensor per sample.
pub fn precompute_gps(
    samples: &[TrajectorySample],
    spec: &GridSpec,
    lib: &PatternLibrary,
    embedder: &dyn TextEmbedder,
) -> Result<Vec<Tensor>> {
    samples
        .iter()
        .map(|s| Ok(gps_semantic(&s.gps, spec.bbox, lib, embedder)?))
        .collect()
}

/// Per-sample forward products shared by pretraining and TTE.
pub struct SampleForward {
    /// [CLS] row of the fused grid sequence, [1, D].
    pub g_cls: Var,
    /// [CLS] row of the road encoder output, [1, D].
    pub r_cls: Var,
    /// Interactor outputs at the real-token rows, [L, D].
    pub token_states: Var,
    /// [CLS] row of the interactor output, [1, D].
    pub x_cls: Var,
}

#[allow(clippy::too_many_arguments)]
pub fn forward_sample(
    tape: &Rc<Tape>,
    bound: &BoundParams,
    dims: &ModelDims,
    sample: &TrajectorySample,
    z_lm: &Tensor,
    net: &RoadNetwork,
    spec: &GridSpec,
    g_emb: &Var,
    mask_positions: Option<&[usize]>,
    train: bool,
    rng: &mut impl Rng,
) -> Result<SampleForward> {
    let (g, empty) = encode_grid(
        tape,
        bound,
        dims,
        &sample.gps,
        &sample.grid,
        spec,
        train,
        rng,
    )?;
    let (g_fused, _gps_pad) = fuse(tape, bound, &g, &tape.constant(z_lm.clone()), dims.t_segments)?;
    let mut grid_pad = vec![false];
    grid_pad.extend(empty);

    let enc = encode_road(
        tape,
        bound,
        dims,
        &sample.road,
        net,
        g_emb,
        mask_positions,
        None,
        train,
        rng,
    )?;
    let out = interact(tape, bound, dims, &enc.r, &g_fused, &grid_pad, train, rng)?;
    let l = sample.road.segments.len();
    Ok(SampleForward {
        g_cls: g_fused.slice_rows(0, 1),
        r_cls: enc.r.slice_rows(0, 1),
        token_states: out.x_hat.slice_rows(1, l + 1),
        x_cls: out.cls(),
    })
}

pub struct BatchLosses {
    pub total: Var,
    pub cl: f64,
    pub mlm: f64,
}

/// Self-supervised losses over one batch: bidirectional InfoNCE over the two
/// modal [CLS] stacks plus mean masked-segment NLL.
#[allow(clippy::too_many_arguments)]
pub fn pretrain_batch(
    tape: &Rc<Tape>,
    bound: &BoundParams,
    model: &MdtiModel,
    batch: &[(&TrajectorySample, &Tensor)],
    net: &RoadNetwork,
    spec: &GridSpec,
    weights: (f64, f64),
    train: bool,
    rng: &mut impl Rng,
) -> Result<BatchLosses> {
    let dims = &model.dims;
    let g_emb = road_gat(tape, bound, dims, net)?;
    let mut g_rows = Vec::with_capacity(batch.len());
    let mut r_rows = Vec::with_capacity(batch.len());
    let mut mlm_terms = Vec::with_capacity(batch.len());
    for (sample, z_lm) in batch {
        let mask = mask_sequence(&sample.road.segments, MASK_RATE, rng)?;
        let fwd = forward_sample(
            tape,
            bound,
            dims,
            sample,
            z_lm,
            net,
            spec,
            &g_emb,
            Some(&mask.positions),
            train,
            rng,
        )?;
        let logits = mlm_logits(bound, &fwd.token_states)?;
        mlm_terms.push(mlm_loss(&logits, &mask)?);
        g_rows.push(fwd.g_cls);
        r_rows.push(fwd.r_cls);
    }
    let g = Var::concat_rows(&g_rows);
    let r = Var::concat_rows(&r_rows);
    let l_cl = info_nce(&g, &r, bound.var("obj.log_tau"))?;
    let mut l_mlm = mlm_terms[0].clone();
    for t in &mlm_terms[1..] {
        l_mlm = l_mlm.add(t);
    }
    l_mlm = l_mlm.scale(1.0 / mlm_terms.len() as f64);
    Ok(BatchLosses {
        total: total_loss(&l_cl, &l_mlm, weights),
        cl: l_cl.value().item(),
        mlm: l_mlm.value().item(),
    })
}

/// Travel-time prediction (minutes) for one sample.
#[allow(clippy::too_many_arguments)]
pub fn predict_tte(
    tape: &Rc<Tape>,
    bound: &BoundParams,
    model: &MdtiModel,
    sample: &TrajectorySample,
    z_lm: &Tensor,
    net: &RoadNetwork,
    spec: &GridSpec,
    g_emb: &Var,
    train: bool,
    rng: &mut impl Rng,
) -> Result<Var> {
    let fwd = forward_sample(
        tape, bound, &model.dims, sample, z_lm, net, spec, g_emb, None, train, rng,
    )?;
    Ok(tte_head(bound, &fwd.x_cls)?)
}
