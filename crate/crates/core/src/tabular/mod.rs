//! Tabular Q-learning schedulers.
//!
//! `q-single` keys each UAV's table on its own lattice cell and treats the others as
//! part of the environment. `q-multi` keys on the joint position and learns values of
//! joint actions, acting on their expectation under the observed action frequencies of
//! the other UAVs.

mod agent;
mod opponent;
mod table;

pub use agent::{
    train_tabular, SuccessTrajectory, TabularConfig, TabularMode, TabularRun, TabularScheduler,
    TABULAR_MANIFEST,
};
pub use opponent::{joint_code, opponent_code, opponent_weighted_value, OpponentModel};
pub use table::{
    epsilon_greedy, q_update, q_update_with, select_action, EpsilonSchedule, QTable, StateKey,
};
