//! Simulation of UAV-assisted multi-access edge computing for vehicular networks.
//!
//! The crate is layered bottom-up:
//!
//! - [`channel`]: radio geometry, line-of-sight probability, channel gain and link rates.
//! - [`qoe`]: mean-opinion-score mapping and aggregation.
//! - [`traffic`]: lane networks, synthetic grid traces, trace files and block density.
//! - [`env`]: the edge-computing MDP and the persistent-monitoring environment.
//! - [`tabular`]: single- and multi-UAV Q-learning with opponent modelling.
//! - [`neural`]: the graph-attention actor-critic on a small reverse-mode tape.
//! - [`harness`]: experiment configuration, the scheduler registry, metrics and sweeps.

pub mod channel;
pub mod env;
pub mod error;
pub mod harness;
pub mod neural;
pub mod qoe;
pub mod tabular;
pub mod traffic;

pub use error::{Error, Result};
