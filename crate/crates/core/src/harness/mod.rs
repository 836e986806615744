//! Experiment orchestration: configuration, MNIST ingestion, client
//! partitioning, the per-round pipelines and metric logging.

pub mod config;
pub mod experiment;
pub mod mnist;
pub mod partition;
pub mod pipeline;
pub mod validate;

pub use config::{ExperimentConfig, MatrixKind, Method, ModelKind, Scale};
pub use experiment::{run_experiment, run_rounds, sweep, write_metrics, MetricsRow};
pub use pipeline::{FlState, RoundOutcome};
