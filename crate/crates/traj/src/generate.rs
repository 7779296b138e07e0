//! Synthetic data: a lattice road network over the bbox plus random-walk
//! trips sampled at a fixed interval with optional GPS noise. Stands in for
//! real taxi corpora so the whole pipeline is testable at desk scale.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrajError};
use crate::geo::LocalProjection;
use crate::grid::discretize;
use crate::types::{
    GpsPoint, GpsTrajectory, GridSpec, RoadNetwork, RoadSegment, RoadTrajectory, RoadType,
    TrajectorySample,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// (lon_min, lat_min, lon_max, lat_max)
    pub bbox: (f64, f64, f64, f64),
    pub grid_rows: usize,
    pub grid_cols: usize,
    /// intersections per side of the lattice road network
    pub lattice_rows: usize,
    pub lattice_cols: usize,
    pub trips: usize,
    pub speed_min_mps: f64,
    pub speed_max_mps: f64,
    pub sample_interval_s: f64,
    pub noise_sigma_m: f64,
    pub min_segments: usize,
    pub max_segments: usize,
    /// When non-empty, each trip emits exactly one of these point counts
    /// (cycled), extending the walk as needed. Used for length studies.
    pub fixed_point_counts: Vec<usize>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            bbox: (-8.70, 41.10, -8.52, 41.24),
            grid_rows: 32,
            grid_cols: 32,
            lattice_rows: 6,
            lattice_cols: 6,
            trips: 100,
            speed_min_mps: 5.0,
            speed_max_mps: 15.0,
            sample_interval_s: 15.0,
            noise_sigma_m: 5.0,
            min_segments: 3,
            max_segments: 10,
            fixed_point_counts: vec![],
        }
    }
}

impl GeneratorConfig {
    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.bbox, self.grid_rows, self.grid_cols)
    }
}

/// Builds the lattice road network: one segment per link between adjacent
/// intersections, directed edges both ways between segments sharing an
/// intersection. Ids are dense and deterministic (horizontal row-major,
/// then vertical).
pub fn build_lattice(cfg: &GeneratorConfig) -> Result<RoadNetwork> {
    let (x0, y0, x1, y1) = cfg.bbox;
    let (lr, lc) = (cfg.lattice_rows, cfg.lattice_cols);
    if lr < 2 || lc < 2 {
        return Err(TrajError::Invariant("lattice must be at least 2x2".into()));
    }
    let proj = LocalProjection::from_bbox(cfg.bbox);
    let node = |r: usize, c: usize| -> (f64, f64) {
        (
            x0 + (c as f64 + 0.5) * (x1 - x0) / lc as f64,
            y0 + (r as f64 + 0.5) * (y1 - y0) / lr as f64,
        )
    };
    let node_index = |r: usize, c: usize| r * lc + c;

    let mut segments = Vec::new();
    let mut endpoints: Vec<(usize, usize)> = Vec::new(); // intersection ids per segment
    let push = |a: (usize, usize), b: (usize, usize), road_type: RoadType,
                    segments: &mut Vec<RoadSegment>,
                    endpoints: &mut Vec<(usize, usize)>| {
        let pa = node(a.0, a.1);
        let pb = node(b.0, b.1);
        let id = segments.len();
        segments.push(RoadSegment {
            id,
            polyline: vec![pa, pb],
            road_type,
            length_m: proj.distance_m(pa, pb),
        });
        endpoints.push((node_index(a.0, a.1), node_index(b.0, b.1)));
    };
    for r in 0..lr {
        let ty = match r % 3 {
            0 => RoadType::Arterial,
            1 => RoadType::Collector,
            _ => RoadType::Local,
        };
        for c in 0..lc - 1 {
            push((r, c), (r, c + 1), ty, &mut segments, &mut endpoints);
        }
    }
    for c in 0..lc {
        let ty = match c % 3 {
            0 => RoadType::Arterial,
            1 => RoadType::Collector,
            _ => RoadType::Ramp,
        };
        for r in 0..lr - 1 {
            push((r, c), (r + 1, c), ty, &mut segments, &mut endpoints);
        }
    }

    // segments sharing an intersection are mutually reachable
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); lr * lc];
    for (id, &(a, b)) in endpoints.iter().enumerate() {
        incident[a].push(id);
        incident[b].push(id);
    }
    let mut edges = Vec::new();
    for ids in &incident {
        for &a in ids {
            for &b in ids {
                if a != b {
                    edges.push((a, b));
                }
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();

    let net = RoadNetwork { segments, edges };
    net.validate()?;
    Ok(net)
}

/// Intersection endpoints per segment, recomputed from the lattice layout.
fn segment_endpoints(cfg: &GeneratorConfig) -> Vec<(usize, usize)> {
    let (lr, lc) = (cfg.lattice_rows, cfg.lattice_cols);
    let node_index = |r: usize, c: usize| r * lc + c;
    let mut out = Vec::new();
    for r in 0..lr {
        for c in 0..lc - 1 {
            out.push((node_index(r, c), node_index(r, c + 1)));
        }
    }
    for c in 0..lc {
        for r in 0..lr - 1 {
            out.push((node_index(r, c), node_index(r + 1, c)));
        }
    }
    out
}

struct Walker<'a> {
    net: &'a RoadNetwork,
    endpoints: &'a [(usize, usize)],
    incident: Vec<Vec<usize>>,
    /// (segment id, exit intersection)
    current: (usize, usize),
}

impl<'a> Walker<'a> {
    fn new(
        net: &'a RoadNetwork,
        endpoints: &'a [(usize, usize)],
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let n_nodes = endpoints
            .iter()
            .map(|&(a, b)| a.max(b))
            .max()
            .unwrap()
            + 1;
        let mut incident = vec![Vec::new(); n_nodes];
        for (id, &(a, b)) in endpoints.iter().enumerate() {
            incident[a].push(id);
            incident[b].push(id);
        }
        let seg = rng.gen_range(0..net.segments.len());
        let (a, b) = endpoints[seg];
        let exit = if rng.gen_bool(0.5) { b } else { a };
        Self {
            net,
            endpoints,
            incident,
            current: (seg, exit),
        }
    }

    fn entry_exit_xy(&self, seg: usize, exit: usize) -> ((f64, f64), (f64, f64)) {
        let s = &self.net.segments[seg];
        let (a, b) = self.endpoints[seg];
        let (pa, pb) = (s.polyline[0], *s.polyline.last().unwrap());
        if exit == b {
            (pa, pb)
        } else {
            debug_assert_eq!(exit, a);
            (pb, pa)
        }
    }

    /// Moves onto a random segment incident to the current exit intersection.
    fn advance(&mut self, rng: &mut ChaCha8Rng) {
        let (seg, exit) = self.current;
        let candidates: Vec<usize> = self.incident[exit]
            .iter()
            .copied()
            .filter(|&s| s != seg)
            .collect();
        let next = candidates[rng.gen_range(0..candidates.len())];
        let (a, b) = self.endpoints[next];
        let new_exit = if a == exit { b } else { a };
        self.current = (next, new_exit);
    }
}

const EPOCH_BASE_S: f64 = 1_700_000_000.0;
const MIN_POINTS: usize = 6;

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

struct RawTrip {
    points: Vec<GpsPoint>,
    point_segments: Vec<usize>,
}

fn simulate_trip(
    cfg: &GeneratorConfig,
    net: &RoadNetwork,
    endpoints: &[(usize, usize)],
    proj: &LocalProjection,
    rng: &mut ChaCha8Rng,
    fixed_points: Option<usize>,
) -> RawTrip {
    let min_len = net
        .segments
        .iter()
        .map(|s| s.length_m)
        .fold(f64::INFINITY, f64::min);
    // cap speed so no segment can be skipped between consecutive samples,
    // keeping per-point road trajectories connected
    let v_cap = 0.9 * min_len / cfg.sample_interval_s;
    let v_hi = cfg.speed_max_mps.min(v_cap);
    let v_lo = cfg.speed_min_mps.min(v_hi);

    let mut walker = Walker::new(net, endpoints, rng);
    let n_segments = rng.gen_range(cfg.min_segments..=cfg.max_segments);
    // whole seconds keep dataset files lossless under the jsonl schema
    let t0 = EPOCH_BASE_S + rng.gen_range(0..7 * 86_400) as f64;

    let (mut seg, mut exit) = walker.current;
    let mut seg_len = net.segments[seg].length_m;
    let mut dist = rng.gen_range(0.3..0.7) * seg_len; // start mid-segment
    let mut speed = rng.gen_range(v_lo..=v_hi);
    let mut segs_entered = 1usize;
    // end offset on the final segment (natural mode)
    let end_frac = rng.gen_range(0.3..0.7);

    let (x0, y0, x1, y1) = cfg.bbox;
    let mut points = Vec::new();
    let mut point_segments = Vec::new();
    let mut tick = 0usize;
    loop {
        let ((ex, ey), (xx, xy)) = walker.entry_exit_xy(seg, exit);
        let (exm, eym) = proj.to_xy(ex, ey);
        let (xxm, xym) = proj.to_xy(xx, xy);
        let f = dist / seg_len;
        let (px, py) = (exm + f * (xxm - exm), eym + f * (xym - eym));
        let (nx, ny) = (
            px + cfg.noise_sigma_m * gaussian(rng),
            py + cfg.noise_sigma_m * gaussian(rng),
        );
        let (lon, lat) = proj.to_lonlat(nx, ny);
        points.push(GpsPoint {
            lon: lon.clamp(x0, x1),
            lat: lat.clamp(y0, y1),
            t: t0 + tick as f64 * cfg.sample_interval_s,
        });
        point_segments.push(seg);
        tick += 1;

        if let Some(n) = fixed_points {
            if points.len() == n {
                break;
            }
        } else if segs_entered >= n_segments && dist >= end_frac * seg_len {
            break;
        }

        // advance one sampling interval
        let mut remaining = cfg.sample_interval_s;
        while remaining > 0.0 {
            let to_exit = (seg_len - dist) / speed;
            if to_exit > remaining {
                dist += speed * remaining;
                remaining = 0.0;
            } else {
                remaining -= to_exit;
                walker.advance(rng);
                (seg, exit) = walker.current;
                seg_len = net.segments[seg].length_m;
                dist = 0.0;
                speed = rng.gen_range(v_lo..=v_hi);
                segs_entered += 1;
            }
        }
    }
    RawTrip {
        points,
        point_segments,
    }
}

/// Generates `cfg.trips` samples plus the network and grid spec.
/// Deterministic given the seed; trips use independent sub-seeds.
pub fn generate_synthetic(
    cfg: &GeneratorConfig,
    seed: u64,
) -> Result<(Vec<TrajectorySample>, RoadNetwork, GridSpec)> {
    let net = build_lattice(cfg)?;
    let spec = cfg.grid_spec()?;
    let endpoints = segment_endpoints(cfg);
    let proj = LocalProjection::from_bbox(cfg.bbox);

    let mut samples = Vec::with_capacity(cfg.trips);
    for trip in 0..cfg.trips {
        let sub_seed = seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(trip as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed);
        let fixed = if cfg.fixed_point_counts.is_empty() {
            None
        } else {
            Some(cfg.fixed_point_counts[trip % cfg.fixed_point_counts.len()])
        };
        // short trips are resampled, never surfaced
        let raw = loop {
            let raw = simulate_trip(cfg, &net, &endpoints, &proj, &mut rng, fixed);
            if raw.points.len() >= MIN_POINTS.min(fixed.unwrap_or(MIN_POINTS)) {
                break raw;
            }
        };

        let gps = GpsTrajectory::new(raw.points)?;
        let grid = discretize(&gps, &spec)?;
        let mut segments = Vec::new();
        let mut timestamps = Vec::new();
        for (p, &s) in gps.points.iter().zip(raw.point_segments.iter()) {
            if segments.last() != Some(&s) {
                segments.push(s);
                timestamps.push(p.t);
            }
        }
        let road = RoadTrajectory {
            segments,
            timestamps,
        };
        let travel_time = gps.duration_s() / 60.0;
        let sample = TrajectorySample {
            id: format!("trip-{trip:05}"),
            gps,
            grid,
            road,
            travel_time,
        };
        sample.validate(&net, &spec)?;
        samples.push(sample);
    }
    Ok((samples, net, spec))
}
