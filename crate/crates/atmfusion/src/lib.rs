//! Pipeline runner, file formats and report bundle for ATM out-of-service
//! detection. The algorithms live in `atmfusion-core`.

pub use atmfusion_core as core;

pub mod checks;
pub mod config;
pub mod experiment;
pub mod io;
pub mod report;

pub use config::{ConfigError, ExperimentConfig};
pub use experiment::{run_experiment, run_with_threads, Outcome, PipelineError, Scored};
