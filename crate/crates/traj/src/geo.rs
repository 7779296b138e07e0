//! Local planar projection. Equirectangular about the bbox center is
//! accurate enough at city scale and keeps the geometry dependency-free.

const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy)]
pub struct LocalProjection {
    lon0: f64,
    lat0: f64,
    cos_lat0: f64,
}

impl LocalProjection {
    pub fn from_bbox(bbox: (f64, f64, f64, f64)) -> Self {
        let (x0, y0, x1, y1) = bbox;
        Self::new((x0 + x1) / 2.0, (y0 + y1) / 2.0)
    }

    pub fn new(lon0: f64, lat0: f64) -> Self {
        Self {
            lon0,
            lat0,
            cos_lat0: lat0.to_radians().cos(),
        }
    }

    /// (lon, lat) degrees -> meters east/north of the origin.
    pub fn to_xy(&self, lon: f64, lat: f64) -> (f64, f64) {
        (
            (lon - self.lon0).to_radians() * self.cos_lat0 * EARTH_RADIUS_M,
            (lat - self.lat0).to_radians() * EARTH_RADIUS_M,
        )
    }

    pub fn to_lonlat(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.lon0 + (x / (self.cos_lat0 * EARTH_RADIUS_M)).to_degrees(),
            self.lat0 + (y / EARTH_RADIUS_M).to_degrees(),
        )
    }

    pub fn distance_m(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        let (ax, ay) = self.to_xy(a.0, a.1);
        let (bx, by) = self.to_xy(b.0, b.1);
        ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
    }

    /// Length of a lon/lat polyline in meters.
    pub fn polyline_length_m(&self, polyline: &[(f64, f64)]) -> f64 {
        polyline
            .windows(2)
            .map(|w| self.distance_m(w[0], w[1]))
            .sum()
    }
}

/// Squared distance from point p to segment (a, b), all in planar meters.
pub fn point_segment_dist_sq(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (px, py) = p;
    let (ax, ay) = a;
    let (bx, by) = b;
    let (dx, dy) = (bx - ax, by - ay);
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq == 0.0 {
        0.0
    } else {
        (((px - ax) * dx + (py - ay) * dy) / len_sq).clamp(0.0, 1.0)
    };
    let (cx, cy) = (ax + t * dx, ay + t * dy);
    (px - cx).powi(2) + (py - cy).powi(2)
}
