use serde::{Deserialize, Serialize};

use crate::error::{Result, TrajError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsPoint {
    pub lon: f64,
    pub lat: f64,
    /// seconds since epoch
    pub t: f64,
}

impl GpsPoint {
    pub fn validate(&self) -> Result<()> {
        if !(-180.0..=180.0).contains(&self.lon)
            || !(-90.0..=90.0).contains(&self.lat)
            || !self.t.is_finite()
        {
            return Err(TrajError::InvalidPoint(format!(
                "({}, {}, {})",
                self.lon, self.lat, self.t
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpsTrajectory {
    pub points: Vec<GpsPoint>,
}

impl GpsTrajectory {
    pub fn new(points: Vec<GpsPoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(TrajError::Invariant("trajectory needs >= 2 points".into()));
        }
        for p in &points {
            p.validate()?;
        }
        for w in points.windows(2) {
            if w[1].t <= w[0].t {
                return Err(TrajError::Invariant(
                    "timestamps must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.points.last().unwrap().t - self.points[0].t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// (lon_min, lat_min, lon_max, lat_max)
    pub bbox: (f64, f64, f64, f64),
    pub rows: usize,
    pub cols: usize,
}

impl GridSpec {
    pub fn new(bbox: (f64, f64, f64, f64), rows: usize, cols: usize) -> Result<Self> {
        let (x0, y0, x1, y1) = bbox;
        if rows == 0 || cols == 0 {
            return Err(TrajError::Invariant("grid must be at least 1x1".into()));
        }
        if x1 <= x0 || y1 <= y0 {
            return Err(TrajError::Invariant("degenerate bbox".into()));
        }
        Ok(Self { bbox, rows, cols })
    }

    pub fn cell_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Center of a cell, the inverse used by the discretization round-trip.
    pub fn cell_center(&self, cell: usize) -> (f64, f64) {
        let (x0, y0, x1, y1) = self.bbox;
        let row = cell / self.cols;
        let col = cell % self.cols;
        let dlon = (x1 - x0) / self.cols as f64;
        let dlat = (y1 - y0) / self.rows as f64;
        (
            x0 + (col as f64 + 0.5) * dlon,
            y0 + (row as f64 + 0.5) * dlat,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTrajectory {
    pub cells: Vec<usize>,
}

/// Road type categories used for the road encoder's type embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoadType {
    Arterial,
    Collector,
    Local,
    Ramp,
}

impl RoadType {
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        match self {
            RoadType::Arterial => 0,
            RoadType::Collector => 1,
            RoadType::Local => 2,
            RoadType::Ramp => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadSegment {
    pub id: usize,
    /// (lon, lat) vertices
    pub polyline: Vec<(f64, f64)>,
    #[serde(rename = "type")]
    pub road_type: RoadType,
    pub length_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadNetwork {
    pub segments: Vec<RoadSegment>,
    /// directed (from, to) pairs over segment ids
    pub edges: Vec<(usize, usize)>,
}

impl RoadNetwork {
    pub fn validate(&self) -> Result<()> {
        let n = self.segments.len();
        for (i, s) in self.segments.iter().enumerate() {
            if s.id != i {
                return Err(TrajError::Invariant(format!(
                    "segment ids must be dense: slot {i} holds id {}",
                    s.id
                )));
            }
            if s.polyline.len() < 2 {
                return Err(TrajError::Invariant(format!(
                    "segment {i} polyline too short"
                )));
            }
        }
        for &(a, b) in &self.edges {
            if a >= n || b >= n {
                return Err(TrajError::Invariant(format!("edge ({a}, {b}) out of range")));
            }
        }
        Ok(())
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.iter().any(|&(a, b)| a == from && b == to)
    }

    pub fn out_degree(&self, id: usize) -> usize {
        self.edges.iter().filter(|&&(a, _)| a == id).count()
    }

    pub fn in_degree(&self, id: usize) -> usize {
        self.edges.iter().filter(|&&(_, b)| b == id).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadTrajectory {
    pub segments: Vec<usize>,
    /// entry timestamp per segment, aligned with `segments`
    pub timestamps: Vec<f64>,
}

impl RoadTrajectory {
    /// Checks the connectivity invariant against a network. Matched (as
    /// opposed to generated) trajectories may legitimately fail this.
    pub fn respects_connectivity(&self, net: &RoadNetwork) -> bool {
        self.segments
            .windows(2)
            .all(|w| w[0] == w[1] || net.has_edge(w[0], w[1]) || net.has_edge(w[1], w[0]))
    }
}

/// One trip in all three modalities plus its travel-time label (minutes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub id: String,
    pub gps: GpsTrajectory,
    pub grid: GridTrajectory,
    pub road: RoadTrajectory,
    /// minutes
    pub travel_time: f64,
}

impl TrajectorySample {
    pub fn validate(&self, net: &RoadNetwork, spec: &GridSpec) -> Result<()> {
        if self.travel_time <= 0.0 {
            return Err(TrajError::Invariant("travel_time must be positive".into()));
        }
        if self.grid.cells.len() != self.gps.points.len() {
            return Err(TrajError::Invariant(
                "grid trajectory length != gps length".into(),
            ));
        }
        for &c in &self.grid.cells {
            if c >= spec.cell_count() {
                return Err(TrajError::Invariant(format!("cell {c} out of range")));
            }
        }
        if self.road.segments.len() != self.road.timestamps.len() {
            return Err(TrajError::Invariant(
                "road segments/timestamps misaligned".into(),
            ));
        }
        for &s in &self.road.segments {
            if s >= net.segments.len() {
                return Err(TrajError::Invariant(format!("segment {s} out of range")));
            }
        }
        Ok(())
    }
}
