//! Grid modality encoder: an 8-neighborhood subgraph over visited cells, two
//! GAT layers, equal-count temporal pooling into T segments and a projection
//! to the shared dimension with a [CLS] row in front.

use std::collections::BTreeMap;
use std::rc::Rc;

use mdti_nn::layers::{gat_layer, linear, GatParams, HeadMerge};
use mdti_nn::{BoolMat, BoundParams, LayerParams, Tape, Tensor, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ModelError, Result};
use crate::ModelDims;

/// Visited cells plus their in-bounds 8-neighbors, with self-loop adjacency.
#[derive(Debug)]
pub struct GridSubgraph {
    /// Sorted cell ids; row order of features and adjacency.
    pub node_ids: Vec<usize>,
    pub adj: BoolMat,
}

impl GridSubgraph {
    pub fn node_index(&self, cell: usize) -> Option<usize> {
        self.node_ids.binary_search(&cell).ok()
    }
}

fn neighbors_8(cell: usize, spec: &mdti_traj::GridSpec) -> Vec<usize> {
    let (rows, cols) = (spec.rows as isize, spec.cols as isize);
    let (r, c) = ((cell / spec.cols) as isize, (cell % spec.cols) as isize);
    let mut out = Vec::with_capacity(8);
    for dr in -1..=1 {
        for dc in -1..=1 {
            if dr == 0 && dc == 0 {
                continue;
            }
            let (nr, nc) = (r + dr, c + dc);
            if nr >= 0 && nr < rows && nc >= 0 && nc < cols {
                out.push((nr * cols + nc) as usize);
            }
        }
    }
    out
}

pub fn build_local_adjacency(
    cells: &[usize],
    spec: &mdti_traj::GridSpec,
) -> Result<GridSubgraph> {
    let total = spec.rows * spec.cols;
    if cells.is_empty() {
        return Err(ModelError::Config("empty cell set".into()));
    }
    let mut nodes: Vec<usize> = Vec::new();
    for &c in cells {
        if c >= total {
            return Err(ModelError::CellOutOfRange(c, total));
        }
        nodes.push(c);
        nodes.extend(neighbors_8(c, spec));
    }
    nodes.sort_unstable();
    nodes.dedup();
    let index: BTreeMap<usize, usize> = nodes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let n = nodes.len();
    let mut adj = BoolMat::new(n, n, false);
    for (i, &c) in nodes.iter().enumerate() {
        adj.set(i, i, true);
        for nb in neighbors_8(c, spec) {
            if let Some(&j) = index.get(&nb) {
                adj.set(i, j, true);
                adj.set(j, i, true);
            }
        }
    }
    Ok(GridSubgraph {
        node_ids: nodes,
        adj,
    })
}

pub const GRID_FEATURES: usize = 3;

/// Speed normalizer (a generous urban ceiling in m/s).
pub const SPEED_NORM_MPS: f64 = 30.0;

/// Per-node features: mean speed of steps leaving the cell normalized by
/// [`SPEED_NORM_MPS`], mean visit minute-of-day / 1440, visit count /
/// trajectory length. Unvisited neighbor nodes stay zero. All three live in
/// O(1) ranges so no single feature dominates the GAT input.
pub fn node_features(
    sub: &GridSubgraph,
    gps: &mdti_traj::GpsTrajectory,
    grid: &mdti_traj::GridTrajectory,
    spec: &mdti_traj::GridSpec,
) -> Result<Tensor> {
    let l = grid.cells.len();
    if gps.points.len() != l {
        return Err(ModelError::Config(format!(
            "gps length {} != grid length {l}",
            gps.points.len()
        )));
    }
    let proj = mdti_traj::LocalProjection::from_bbox(spec.bbox);
    let n = sub.node_ids.len();
    let mut speed_sum = vec![0.0; n];
    let mut speed_cnt = vec![0usize; n];
    let mut minute_sum = vec![0.0; n];
    let mut visits = vec![0usize; n];
    for (t, &cell) in grid.cells.iter().enumerate() {
        let i = sub
            .node_index(cell)
            .ok_or_else(|| ModelError::Config(format!("cell {cell} missing from subgraph")))?;
        let p = &gps.points[t];
        visits[i] += 1;
        let minute = (p.t.rem_euclid(86_400.0)) / 60.0;
        minute_sum[i] += minute / 1440.0;
        if t + 1 < l {
            let q = &gps.points[t + 1];
            let dt = q.t - p.t;
            if dt > 0.0 {
                speed_sum[i] += proj.distance_m((p.lon, p.lat), (q.lon, q.lat)) / dt;
                speed_cnt[i] += 1;
            }
        }
    }
    Ok(Tensor::from_fn(n, GRID_FEATURES, |i, j| match j {
        0 if speed_cnt[i] > 0 => speed_sum[i] / speed_cnt[i] as f64 / SPEED_NORM_MPS,
        1 if visits[i] > 0 => minute_sum[i] / visits[i] as f64,
        2 => visits[i] as f64 / l as f64,
        _ => 0.0,
    }))
}

pub fn init_grid_params(params: &mut LayerParams, dims: &ModelDims, rng: &mut ChaCha8Rng) {
    let h = dims.gat_hidden;
    let reg = |params: &mut LayerParams, name: &str, t: Tensor| {
        params.insert(name, t).expect("unique grid param");
    };
    reg(params, "grid.gat1.w", mdti_nn::init::xavier_uniform(rng, GRID_FEATURES, h));
    reg(params, "grid.gat1.a_src", mdti_nn::init::normal(rng, 1, h, 0.1));
    reg(params, "grid.gat1.a_dst", mdti_nn::init::normal(rng, 1, h, 0.1));
    reg(params, "grid.gat2.w", mdti_nn::init::xavier_uniform(rng, h, dims.heads * h));
    reg(params, "grid.gat2.a_src", mdti_nn::init::normal(rng, 1, dims.heads * h, 0.1));
    reg(params, "grid.gat2.a_dst", mdti_nn::init::normal(rng, 1, dims.heads * h, 0.1));
    reg(params, "grid.proj.w", mdti_nn::init::xavier_uniform(rng, h, dims.d));
    reg(params, "grid.proj.b", Tensor::zeros(1, dims.d));
    reg(params, "grid.cls", mdti_nn::init::normal(rng, 1, dims.d, 0.02));
}

/// Timestep range of temporal segment `s` over `l` steps: equal-count bins
/// [floor(s·l/T), floor((s+1)·l/T)).
pub fn segment_bounds(s: usize, l: usize, t_segments: usize) -> (usize, usize) {
    (s * l / t_segments, (s + 1) * l / t_segments)
}

/// Runs the grid branch on one sample. Returns the (T+1, D) sequence with
/// [CLS] at row 0 and a mask flagging segments that pooled zero timesteps.
pub fn encode_grid(
    tape: &Rc<Tape>,
    p: &BoundParams,
    dims: &ModelDims,
    gps: &mdti_traj::GpsTrajectory,
    grid: &mdti_traj::GridTrajectory,
    spec: &mdti_traj::GridSpec,
    train: bool,
    rng: &mut impl Rng,
) -> Result<(Var, Vec<bool>)> {
    let sub = build_local_adjacency(&grid.cells, spec)?;
    let feats = tape.constant(node_features(&sub, gps, grid, spec)?);
    let h1 = gat_layer(
        &feats,
        &sub.adj,
        &GatParams {
            w: p.var("grid.gat1.w"),
            a_src: p.var("grid.gat1.a_src"),
            a_dst: p.var("grid.gat1.a_dst"),
        },
        dims.heads,
        HeadMerge::Concat,
    )?;
    let h2 = gat_layer(
        &h1,
        &sub.adj,
        &GatParams {
            w: p.var("grid.gat2.w"),
            a_src: p.var("grid.gat2.a_src"),
            a_dst: p.var("grid.gat2.a_dst"),
        },
        dims.heads,
        HeadMerge::Average,
    )?;

    let step_nodes: Vec<usize> = grid
        .cells
        .iter()
        .map(|&c| sub.node_index(c).expect("visited cell is a node"))
        .collect();
    let per_step = h2.gather_rows(&step_nodes);

    let l = step_nodes.len();
    let t = dims.t_segments;
    let mut seg_rows = Vec::with_capacity(t);
    let mut empty_mask = Vec::with_capacity(t);
    for s in 0..t {
        let (lo, hi) = segment_bounds(s, l, t);
        if lo < hi {
            seg_rows.push(per_step.slice_rows(lo, hi).mean_rows());
            empty_mask.push(false);
        } else {
            seg_rows.push(tape.constant(Tensor::zeros(1, dims.gat_hidden)));
            empty_mask.push(true);
        }
    }
    let pooled = Var::concat_rows(&seg_rows);
    let mut segs = linear(&pooled, p.var("grid.proj.w"), Some(p.var("grid.proj.b")))?;
    if train && dims.dropout > 0.0 {
        segs = segs.dropout(dims.dropout, train, rng);
    }
    let cls = p.var("grid.cls").add(&segs.mean_rows());
    Ok((Var::concat_rows(&[cls, segs]), empty_mask))
}
