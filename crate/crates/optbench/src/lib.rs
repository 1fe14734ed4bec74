//! Experiment front end for `optbench-core`: TOML run configs, training / regret / ablation
//! orchestration and deterministic CSV traces.

pub mod config;
pub mod experiment;
pub mod runner;
pub mod trace;

pub use config::{load_config, parse_config, ConfigError, ExperimentKind, RunConfig};
pub use experiment::{run_experiment, ExperimentError, ExperimentReport, RunResult};
pub use trace::{emit_csv, parse_csv, read_csv, RunTrace, TraceRow};
