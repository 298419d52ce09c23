//! Experiment orchestration: JSON configs, the algorithm registry, metrics files,
//! checkpoints and parameter sweeps.
//!
//! A run is fully determined by its [`ExperimentConfig`]: the seed drives the
//! generated traffic, the environment and the learner through separate streams.

mod config;
mod experiment;
mod metrics;
mod registry;
mod sweep;

pub use config::{ExperimentConfig, GridScenario, Scenario, TraceScenario};
pub use experiment::{evaluate, evaluate_agent, run_experiment, train, RunArtifacts, Trained, METRICS_FILE};
pub use metrics::{
    read_metrics, read_sweep, sweep_header, write_metrics, write_sweep, MetricsRow, SweepRow,
    METRICS_HEADER,
};
pub use registry::{Agent, RandomScheduler, Registry, Strategy};
pub use sweep::{sub_seed, sweep, sweep_rows, with_param, SWEEP_FILE};

pub use crate::env::offloading_count;
