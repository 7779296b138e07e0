//! GPS modality encoder: chunk raw points into 9-dimensional vectors, score
//! them against a pattern library, extract per-channel trends, render text
//! prompts and embed them with a pluggable text embedder.

use mdti_nn::Tensor;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ModelError, Result};

pub const CHUNK_LEN: usize = 3;
pub const CHUNK_DIM: usize = CHUNK_LEN * 3;

/// Rows of (lon, lat, speed m/s) per timestep. Speed of the last point
/// repeats the last step's speed so every row has all three channels.
pub fn motion_matrix(
    gps: &mdti_traj::GpsTrajectory,
    bbox: (f64, f64, f64, f64),
) -> Tensor {
    let proj = mdti_traj::LocalProjection::from_bbox(bbox);
    let pts = &gps.points;
    let n = pts.len();
    let mut speeds = vec![0.0; n];
    for t in 0..n.saturating_sub(1) {
        let (p, q) = (&pts[t], &pts[t + 1]);
        let dt = q.t - p.t;
        speeds[t] = if dt > 0.0 {
            proj.distance_m((p.lon, p.lat), (q.lon, q.lat)) / dt
        } else {
            0.0
        };
    }
    if n >= 2 {
        speeds[n - 1] = speeds[n - 2];
    }
    Tensor::from_fn(n, 3, |i, j| match j {
        0 => pts[i].lon,
        1 => pts[i].lat,
        _ => speeds[i],
    })
}

/// Non-overlapping length-3 chunks, flattened row-major to 9 values; a
/// trailing remainder of 1-2 points is dropped.
pub fn chunk(traj: &Tensor) -> Result<Vec<[f64; CHUNK_DIM]>> {
    assert_eq!(traj.cols(), 3, "motion matrix has 3 channels");
    let t = traj.rows();
    if t < CHUNK_LEN {
        return Err(ModelError::TooShortToChunk(t));
    }
    let mut out = Vec::with_capacity(t / CHUNK_LEN);
    for m in 0..t / CHUNK_LEN {
        let mut v = [0.0; CHUNK_DIM];
        for (k, x) in v.iter_mut().enumerate() {
            *x = traj.get(m * CHUNK_LEN + k / 3, k % 3);
        }
        out.push(v);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternLibrary {
    /// K reference patterns, one per row, 9 columns.
    pub patterns: Tensor,
}

impl PatternLibrary {
    pub fn new(patterns: Tensor) -> Result<Self> {
        if patterns.rows() == 0 || patterns.cols() != CHUNK_DIM {
            return Err(ModelError::Config(format!(
                "pattern library shape {:?}",
                patterns.shape()
            )));
        }
        if !patterns.all_finite() {
            return Err(ModelError::Config("non-finite pattern library".into()));
        }
        Ok(PatternLibrary { patterns })
    }

    pub fn k(&self) -> usize {
        self.patterns.rows()
    }
}

/// S_k = exp(-||p - P_k||_2 / (2 sqrt 3)) for every library row.
pub fn pattern_similarity(chunk: &[f64; CHUNK_DIM], lib: &PatternLibrary) -> Vec<f64> {
    let scale = 2.0 * 3.0_f64.sqrt();
    (0..lib.k())
        .map(|k| {
            let row = lib.patterns.row_slice(k);
            let dist = chunk
                .iter()
                .zip(row)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            (-dist / scale).exp()
        })
        .collect()
}

/// Literal sum of consecutive differences; telescopes to last - first.
pub fn trend(values: &[f64]) -> f64 {
    values.windows(2).map(|w| w[1] - w[0]).sum()
}

/// K-means (Lloyd's algorithm) over training chunks. Centroids are seeded by
/// a shuffled draw of distinct chunks; short corpora repeat rows cyclically.
/// Empty clusters keep their previous centroid.
pub fn fit_pattern_library(
    chunks: &[[f64; CHUNK_DIM]],
    k: usize,
    iters: usize,
    seed: u64,
) -> Result<PatternLibrary> {
    if chunks.is_empty() || k == 0 {
        return Err(ModelError::Config("k-means needs chunks and k >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..chunks.len()).collect();
    order.shuffle(&mut rng);
    let mut centroids: Vec<[f64; CHUNK_DIM]> =
        (0..k).map(|i| chunks[order[i % order.len()]]).collect();

    let dist_sq = |a: &[f64; CHUNK_DIM], b: &[f64; CHUNK_DIM]| {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
    };
    let mut assign = vec![0usize; chunks.len()];
    for _ in 0..iters {
        for (i, c) in chunks.iter().enumerate() {
            assign[i] = (0..k)
                .min_by(|&a, &b| {
                    dist_sq(c, &centroids[a])
                        .partial_cmp(&dist_sq(c, &centroids[b]))
                        .unwrap()
                })
                .unwrap();
        }
        let mut sums = vec![[0.0; CHUNK_DIM]; k];
        let mut counts = vec![0usize; k];
        for (i, c) in chunks.iter().enumerate() {
            counts[assign[i]] += 1;
            for (s, x) in sums[assign[i]].iter_mut().zip(c) {
                *s += x;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                for (c, s) in centroids[j].iter_mut().zip(&sums[j]) {
                    *c = s / counts[j] as f64;
                }
            }
        }
    }
    let flat: Vec<f64> = centroids.iter().flatten().copied().collect();
    PatternLibrary::new(Tensor::new(k, CHUNK_DIM, flat)?)
}

/// 6 significant digits, plain decimal.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x:.5}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let factor = 10f64.powi(5 - magnitude);
    let rounded = (x * factor).round() / factor;
    format!("{rounded:.decimals$}")
}

/// Renders one prompt line. `top_patterns` must already be sorted by
/// descending similarity with ties broken toward the lower index.
pub fn build_prompt(
    segment_index: usize,
    values: &[f64; CHUNK_DIM],
    trends: &[f64; 3],
    top_patterns: &[(usize, f64)],
) -> String {
    let v = values.iter().map(|&x| sig6(x)).collect::<Vec<_>>().join(" ");
    let patterns = if top_patterns.is_empty() {
        "none".to_string()
    } else {
        top_patterns
            .iter()
            .map(|&(k, s)| format!("{k}:{}", sig6(s)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    format!(
        "segment {segment_index}: values {v}; trend lon {} lat {} speed {}; patterns: {patterns}",
        sig6(trends[0]),
        sig6(trends[1]),
        sig6(trends[2]),
    )
}

/// Highest-similarity library entries, descending, lower index first on ties.
pub fn top_patterns(similarities: &[f64], top: usize) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = similarities.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    ranked.truncate(top);
    ranked
}

/// One prompt per chunk: values, per-channel trends and the top-3 patterns.
pub fn build_prompts(chunks: &[[f64; CHUNK_DIM]], lib: &PatternLibrary) -> Vec<String> {
    chunks
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let trends = [
                trend(&[c[0], c[3], c[6]]),
                trend(&[c[1], c[4], c[7]]),
                trend(&[c[2], c[5], c[8]]),
            ];
            let sims = pattern_similarity(c, lib);
            build_prompt(i, c, &trends, &top_patterns(&sims, 3))
        })
        .collect()
}

pub trait TextEmbedder {
    fn d_lm(&self) -> usize;
    /// Embeds one prompt into a [1, d_lm] row. Must be deterministic.
    fn embed(&self, text: &str) -> std::result::Result<Tensor, String>;
}

/// Deterministic stub embedder: whitespace tokens are FNV-1a hashed into a
/// 4096-bucket count vector, projected with a fixed seeded matrix and layer
/// normalized.
pub struct HashEmbedder {
    projection: Tensor,
    d_lm: usize,
}

pub const HASH_BUCKETS: usize = 4096;

fn fnv1a64(token: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in token.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl HashEmbedder {
    pub fn new(d_lm: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let projection =
            mdti_nn::init::normal(&mut rng, HASH_BUCKETS, d_lm, 1.0 / (HASH_BUCKETS as f64).sqrt());
        HashEmbedder { projection, d_lm }
    }
}

impl TextEmbedder for HashEmbedder {
    fn d_lm(&self) -> usize {
        self.d_lm
    }

    fn embed(&self, text: &str) -> std::result::Result<Tensor, String> {
        let mut counts = vec![0.0; HASH_BUCKETS];
        for token in text.split_whitespace() {
            counts[(fnv1a64(token) % HASH_BUCKETS as u64) as usize] += 1.0;
        }
        let bag = Tensor::new(1, HASH_BUCKETS, counts).map_err(|e| e.to_string())?;
        let z = bag.matmul(&self.projection);
        let mean = z.sum() / self.d_lm as f64;
        let var = z.data().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / self.d_lm as f64;
        let inv = 1.0 / (var + 1e-5).sqrt();
        Ok(z.map(|x| (x - mean) * inv))
    }
}

/// Stacks one embedding row per prompt, in order.
pub fn embed_prompts(prompts: &[String], embedder: &dyn TextEmbedder) -> Result<Tensor> {
    let mut rows = Vec::with_capacity(prompts.len());
    for (index, prompt) in prompts.iter().enumerate() {
        let row = embedder
            .embed(prompt)
            .map_err(|message| ModelError::Embedder { index, message })?;
        rows.push(row.data().to_vec());
    }
    if rows.is_empty() {
        return Err(ModelError::Config("no prompts to embed".into()));
    }
    Ok(Tensor::from_rows(&rows))
}

/// Full GPS branch for one sample: motion matrix, chunks, prompts, embeddings.
pub fn gps_semantic(
    gps: &mdti_traj::GpsTrajectory,
    bbox: (f64, f64, f64, f64),
    lib: &PatternLibrary,
    embedder: &dyn TextEmbedder,
) -> Result<Tensor> {
    let chunks = chunk(&motion_matrix(gps, bbox))?;
    embed_prompts(&build_prompts(&chunks, lib), embedder)
}
