use crate::error::{Result, TrajError};
use crate::types::{GpsTrajectory, GridSpec, GridTrajectory};

/// Maps each GPS point to its grid cell: g = row * cols + col, with row/col
/// floor-divided from the bbox. Points exactly on the bbox maximum clamp
/// into the last row/column.
pub fn discretize(gps: &GpsTrajectory, spec: &GridSpec) -> Result<GridTrajectory> {
    let (x0, y0, x1, y1) = spec.bbox;
    let dlon = (x1 - x0) / spec.cols as f64;
    let dlat = (y1 - y0) / spec.rows as f64;
    let mut cells = Vec::with_capacity(gps.points.len());
    for (index, p) in gps.points.iter().enumerate() {
        if p.lon < x0 || p.lon > x1 || p.lat < y0 || p.lat > y1 {
            return Err(TrajError::OutOfBounds {
                index,
                lon: p.lon,
                lat: p.lat,
            });
        }
        let col = (((p.lon - x0) / dlon).floor() as usize).min(spec.cols - 1);
        let row = (((p.lat - y0) / dlat).floor() as usize).min(spec.rows - 1);
        cells.push(row * spec.cols + col);
    }
    Ok(GridTrajectory { cells })
}
