//! Experiment runner: configuration, the verification experiments,
//! parameter sweeps, reports and the acceptance suite.

pub mod acceptance;
pub mod analysis;
pub mod config;
pub mod experiments;
pub mod output;
pub mod report;
pub mod sweep;

pub use config::{ExperimentOptions, RunConfig};
pub use experiments::{run_experiment, ExperimentKind, ExperimentOutput};
pub use report::{BoundCheck, ExperimentReport};
