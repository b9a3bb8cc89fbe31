//! Sensor-aided frame reduction for opportunistic captures.
//!
//! Stages, cheapest first: exposure gate, accelerometer motion gate,
//! anisotropy quality percentile, orientation dedup among temporal
//! neighbors, and global viewing-direction coverage pruning.

pub mod anisotropy;
pub mod config;
pub mod dedup;
pub mod entropy;
pub mod gates;
pub mod io;
pub mod pipeline;

pub use anisotropy::{anisotropy, directional_entropies};
pub use config::ReduceConfig;
pub use dedup::{coverage_bin, coverage_prune, temporal_dedup, Candidate};
pub use entropy::renyi_entropy;
pub use gates::{exposure_ok, motion_gate};
pub use pipeline::{percentile, reduce_stream, DroppedCounts, ReductionReport};
