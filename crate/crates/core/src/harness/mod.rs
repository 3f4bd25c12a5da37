//! Experiment configuration, orchestration and report emission.

mod config;
mod experiments;
mod report;

pub use config::{validate_config, ExperimentConfig, ExperimentKind, TargetChoice, Violation};
pub use experiments::run_experiment;
pub use report::{Manifest, Report, Table, Verdict};
