//! Graph-attention actor-critic.
//!
//! Every agent encodes its observation with a small convolutional network, mixes in
//! the features of the other agents through additive graph attention, and feeds both
//! into actor and critic heads. Gradients come from the reverse-mode [`tape`].

mod a2c;
mod network;
mod params;
pub mod tape;
mod trainer;

pub use a2c::{
    a2c_update, loss_and_gradient, standardize, surrogate_loss, targets, A2cConfig, Batch, LossReport,
    Momentum, StepSample, Targets,
};
pub use network::{AgentOutput, Architecture, AttentionMatrix, Forward, NetworkConfig, Policy};
pub use params::{ParameterSet, Segment};
pub use trainer::{train_magcdrl, NeuralConfig, NeuralRun, NeuralScheduler};
