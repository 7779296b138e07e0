//! Multimodal trajectory data model: GPS/grid/road trajectories, grid
//! discretization, simplified nearest-segment map matching, a synthetic
//! lattice-network trip generator, dataset splitting and file I/O.

pub mod error;
pub mod generate;
pub mod geo;
pub mod grid;
pub mod io;
pub mod matching;
pub mod split;
pub mod types;

pub use error::{Result, TrajError};
pub use generate::{build_lattice, generate_synthetic, GeneratorConfig};
pub use geo::LocalProjection;
pub use grid::discretize;
pub use matching::map_match_nearest;
pub use split::split_dataset;
pub use types::{
    GpsPoint, GpsTrajectory, GridSpec, GridTrajectory, RoadNetwork, RoadSegment, RoadTrajectory,
    RoadType, TrajectorySample,
};
