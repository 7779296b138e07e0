//! Dataset file formats: line-delimited JSON samples plus JSON network and
//! grid files. Writes are deterministic so identical inputs produce
//! byte-identical files.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::types::{
    GpsPoint, GpsTrajectory, GridSpec, GridTrajectory, RoadNetwork, RoadTrajectory,
    TrajectorySample,
};

#[derive(Serialize, Deserialize)]
struct RoadRecord {
    segs: Vec<usize>,
    ts: Vec<i64>,
}

#[derive(Serialize, Deserialize)]
struct SampleRecord {
    id: String,
    gps: Vec<(f64, f64, f64)>,
    grid: Vec<usize>,
    road: RoadRecord,
    tt_min: f64,
}

impl From<&TrajectorySample> for SampleRecord {
    fn from(s: &TrajectorySample) -> Self {
        SampleRecord {
            id: s.id.clone(),
            gps: s.gps.points.iter().map(|p| (p.lon, p.lat, p.t)).collect(),
            grid: s.grid.cells.clone(),
            road: RoadRecord {
                segs: s.road.segments.clone(),
                ts: s.road.timestamps.iter().map(|&t| t as i64).collect(),
            },
            tt_min: s.travel_time,
        }
    }
}

impl SampleRecord {
    fn into_sample(self) -> Result<TrajectorySample> {
        Ok(TrajectorySample {
            id: self.id,
            gps: GpsTrajectory::new(
                self.gps
                    .into_iter()
                    .map(|(lon, lat, t)| GpsPoint { lon, lat, t })
                    .collect(),
            )?,
            grid: GridTrajectory { cells: self.grid },
            road: RoadTrajectory {
                segments: self.road.segs,
                timestamps: self.road.ts.into_iter().map(|t| t as f64).collect(),
            },
            travel_time: self.tt_min,
        })
    }
}

pub fn write_dataset_jsonl(path: &Path, samples: &[TrajectorySample]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in samples {
        serde_json::to_writer(&mut w, &SampleRecord::from(s))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_jsonl(path: &Path) -> Result<Vec<TrajectorySample>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SampleRecord = serde_json::from_str(&line)?;
        out.push(rec.into_sample()?);
    }
    Ok(out)
}

pub fn write_network_json(path: &Path, net: &RoadNetwork) -> Result<()> {
    fs::write(path, serde_json::to_string(net)?)?;
    Ok(())
}

pub fn read_network_json(path: &Path) -> Result<RoadNetwork> {
    let net: RoadNetwork = serde_json::from_str(&fs::read_to_string(path)?)?;
    net.validate()?;
    Ok(net)
}

pub fn write_grid_json(path: &Path, spec: &GridSpec) -> Result<()> {
    fs::write(path, serde_json::to_string(spec)?)?;
    Ok(())
}

pub fn read_grid_json(path: &Path) -> Result<GridSpec> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Writes dataset.jsonl, network.json and grid.json into a directory.
pub fn save_dataset_dir(
    dir: &Path,
    samples: &[TrajectorySample],
    net: &RoadNetwork,
    spec: &GridSpec,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_dataset_jsonl(&dir.join("dataset.jsonl"), samples)?;
    write_network_json(&dir.join("network.json"), net)?;
    write_grid_json(&dir.join("grid.json"), spec)?;
    Ok(())
}

pub fn load_dataset_dir(dir: &Path) -> Result<(Vec<TrajectorySample>, RoadNetwork, GridSpec)> {
    Ok((
        read_dataset_jsonl(&dir.join("dataset.jsonl"))?,
        read_network_json(&dir.join("network.json"))?,
        read_grid_json(&dir.join("grid.json"))?,
    ))
}
