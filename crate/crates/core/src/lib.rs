//! Deterministic simulator of ant-colony nest migration on graphs embedded in the plane
//! whose edges are split into single-occupancy segments, each carrying an
//! evaporating pheromone spike train.

pub mod cli;
pub mod colony;
pub mod config;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod field;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod rng;
pub mod sweep;

pub use error::{Error, Result};
