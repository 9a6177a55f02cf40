//! Experiment driver for bounded-domain vortex patch computations.

pub mod config;
pub mod field_io;
pub mod run;

pub use config::{ConfigError, ExperimentConfig};
pub use run::{run_experiment, Command, RunError, RunReport};
