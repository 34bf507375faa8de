//! Experiment harness: configuration, ground-truth simulation, paired filter
//! runs, metrics and artifact export.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod export;
pub mod metrics;
pub mod run;
pub mod sim;

pub use config::{BenchmarkKind, ConfigError, ExperimentConfig};
pub use export::{export_trace, ExportError};
pub use metrics::{compute_rmse, MetricsError, MetricsSummary, Window};
pub use run::{run_experiment, RunError, RunTrace, StepRecord};
pub use sim::{simulate_truth, Simulation};
