//! Benchmark harness: experiment configs, runs and seed sweeps, trace files
//! and SVG convergence plots.

pub mod cli;
pub mod config;
pub mod data;
pub mod experiments;
pub mod plot;
pub mod runner;
pub mod tracefile;

pub use config::{Algo, ExperimentConfig};
pub use runner::{run_config, run_on, RunSet, SeedTrace};
