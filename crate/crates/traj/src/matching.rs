//! Simplified map matching: each GPS point is assigned to the road segment
//! whose polyline is nearest in projected planar coordinates. Ties go to the
//! lower segment id. Not an HMM matcher by design.

use crate::error::{Result, TrajError};
use crate::geo::{point_segment_dist_sq, LocalProjection};
use crate::types::{GpsTrajectory, RoadNetwork, RoadTrajectory};

/// Nearest segment id for a single projected point.
fn nearest_segment(
    xy: (f64, f64),
    net: &RoadNetwork,
    proj: &LocalProjection,
) -> usize {
    let mut best = (f64::INFINITY, 0usize);
    for seg in &net.segments {
        let mut d = f64::INFINITY;
        for w in seg.polyline.windows(2) {
            let a = proj.to_xy(w[0].0, w[0].1);
            let b = proj.to_xy(w[1].0, w[1].1);
            d = d.min(point_segment_dist_sq(xy, a, b));
        }
        // strict < keeps the lowest id on ties
        if d < best.0 {
            best = (d, seg.id);
        }
    }
    best.1
}

/// Matches every point to its nearest segment, collapses consecutive
/// duplicates, and carries the timestamp of the first point on each run.
pub fn map_match_nearest(gps: &GpsTrajectory, net: &RoadNetwork) -> Result<RoadTrajectory> {
    if net.segments.is_empty() {
        return Err(TrajError::Empty("road network".into()));
    }
    let all: Vec<(f64, f64)> = net
        .segments
        .iter()
        .flat_map(|s| s.polyline.iter().copied())
        .collect();
    let (lon_min, lon_max) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.0), hi.max(p.0))
        });
    let (lat_min, lat_max) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.1), hi.max(p.1))
        });
    let proj = LocalProjection::from_bbox((lon_min, lat_min, lon_max, lat_max));

    let mut segments = Vec::new();
    let mut timestamps = Vec::new();
    for p in &gps.points {
        let seg = nearest_segment(proj.to_xy(p.lon, p.lat), net, &proj);
        if segments.last() != Some(&seg) {
            segments.push(seg);
            timestamps.push(p.t);
        }
    }
    Ok(RoadTrajectory {
        segments,
        timestamps,
    })
}
