//! File formats, artifacts and commands of the harmonization test bench.

pub mod artifacts;
pub mod campaign;
pub mod cli;
pub mod commands;
pub mod error;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod scenario;
pub mod schedule;
pub mod tables;
