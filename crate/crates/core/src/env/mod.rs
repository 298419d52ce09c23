//! Markov environments driven by the schedulers.
//!
//! Two environments share one [`Environment`] interface:
//!
//! - [`MecEnv`]: UAVs on a discrete 3-D lattice serve vehicles from a trace; the
//!   shared reward is +0.8 / −0.1 / −0.8 depending on whether the total score rose,
//!   held, or fell since the previous slot.
//! - [`MonitorEnv`]: agents patrol a 2-D grid whose cells accumulate a staleness
//!   penalty until someone covers them again.

mod map;
mod mec;
mod monitor;
mod observe;
mod runner;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use map::OccupancyMap;
pub use mec::{
    assign_vehicles, offloading_count, step_mec, FrameScore, InitPolicy, MecEnv, MecModel,
    ShortageGate, MOS_TIE_TOLERANCE, REWARD_DOWN, REWARD_TIE, REWARD_UP,
};
pub use monitor::{step_monitor, MapSource, MonitorConfig, MonitorEnv, MonitorModel};
pub use observe::{observe, FieldGrid, Observation, OBS_CHANNELS};
pub use runner::{run_episode, EpisodeSummary, Scheduler};

/// Number of discrete actions available to every agent.
pub const NUM_ACTIONS: usize = 9;

/// One of nine moves. Indices 0–7 are the corners of the unit cube around the agent,
/// index 8 is "stay".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action(u8);

impl Action {
    pub const STAY: Action = Action(8);

    pub fn new(index: usize) -> Result<Self> {
        if index < NUM_ACTIONS {
            Ok(Action(index as u8))
        } else {
            Err(Error::invalid(format!("action index {index} out of range")))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = Action> {
        (0..NUM_ACTIONS as u8).map(Action)
    }

    /// Lattice displacement `(dx, dy, dz)`. Corners are ordered lexicographically by
    /// `(dz, dy, dx)` with +1 before −1.
    pub fn direction(self) -> (i32, i32, i32) {
        if self == Self::STAY {
            return (0, 0, 0);
        }
        let bit = |b: u8| if self.0 & b == 0 { 1 } else { -1 };
        (bit(1), bit(2), bit(4))
    }

    /// Displacement `(dx, dy)` on a planar grid: the eight neighbours, ordered by
    /// `(dy, dx)` with +1 before 0 before −1, then stay.
    pub fn planar_direction(self) -> (i32, i32) {
        const MOVES: [(i32, i32); NUM_ACTIONS] = [
            (1, 1),
            (0, 1),
            (-1, 1),
            (1, 0),
            (-1, 0),
            (1, -1),
            (0, -1),
            (-1, -1),
            (0, 0),
        ];
        MOVES[self.index()]
    }
}

/// A lattice point index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: u16,
    pub y: u16,
    pub z: u16,
}

impl Cell {
    pub const fn new(x: u16, y: u16, z: u16) -> Self {
        Self { x, y, z }
    }
}

/// Discrete flight space: `x_max × y_max × z_max` points spaced half a cube side apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lattice {
    pub x_max: u16,
    pub y_max: u16,
    pub z_max: u16,
    /// Side of one cube, metres. Neighbouring lattice points are `cell_size / 2` apart.
    pub cell_size: f64,
}

impl Default for Lattice {
    fn default() -> Self {
        Self {
            x_max: 10,
            y_max: 10,
            z_max: 1,
            cell_size: 200.0,
        }
    }
}

impl Lattice {
    pub fn new(x_max: u16, y_max: u16, z_max: u16, cell_size: f64) -> Result<Self> {
        let l = Self {
            x_max,
            y_max,
            z_max,
            cell_size,
        };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_max < 1 || self.y_max < 1 || self.z_max < 1 {
            return Err(Error::config("lattice dimensions must be at least 1"));
        }
        if !(self.cell_size > 0.0) {
            return Err(Error::config("lattice cell_size must be positive"));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        self.cell_size / 2.0
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x < self.x_max && c.y < self.y_max && c.z < self.z_max
    }

    pub fn len(&self) -> usize {
        self.x_max as usize * self.y_max as usize * self.z_max as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.z_max).flat_map(move |z| {
            (0..self.y_max).flat_map(move |y| (0..self.x_max).map(move |x| Cell::new(x, y, z)))
        })
    }

    /// Applies `action`, clamping each axis at the lattice border.
    pub fn apply(&self, c: Cell, action: Action) -> Cell {
        let (dx, dy, dz) = action.direction();
        let clamp = |v: u16, d: i32, max: u16| (v as i32 + d).clamp(0, max as i32 - 1) as u16;
        Cell::new(
            clamp(c.x, dx, self.x_max),
            clamp(c.y, dy, self.y_max),
            clamp(c.z, dz, self.z_max),
        )
    }

    /// World position of a lattice point; level 0 flies at `base_height`.
    pub fn position(&self, c: Cell, base_height: f64) -> crate::channel::Position {
        let s = self.spacing();
        crate::channel::Position::new(
            c.x as f64 * s,
            c.y as f64 * s,
            base_height + c.z as f64 * s,
        )
    }

    pub fn on_border(&self, c: Cell) -> bool {
        c.x == 0 || c.y == 0 || c.x + 1 == self.x_max || c.y + 1 == self.y_max
    }
}

/// Everything that changes from slot to slot.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub uav_cells: Vec<Cell>,
    pub frame_index: usize,
    /// Total score of the previous slot (edge-computing environment only).
    pub last_mos: f64,
    /// Per-cell staleness penalties in `[−R_max, 0]` (monitoring environment only).
    pub monitor_penalties: Option<Vec<f64>>,
}

/// Per-slot diagnostics reported alongside the reward.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepInfo {
    pub mos_total: f64,
    pub vehicles: usize,
    pub offloading_uavs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: WorldState,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// One joint transition with a shared reward.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: WorldState,
    pub actions: Vec<Action>,
    pub reward: f64,
    pub next_state: WorldState,
    pub done: bool,
}

/// Discounted sum `Σ βⁿ r_n`, accumulated from the back.
pub fn discounted_return(rewards: &[f64], discount: f64) -> Result<f64> {
    Ok(discounted_returns(rewards, discount)?
        .first()
        .copied()
        .unwrap_or(0.0))
}

/// Discounted return from every position of `rewards`.
pub fn discounted_returns(rewards: &[f64], discount: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&discount) {
        return Err(Error::invalid(format!("discount {discount} outside [0, 1)")));
    }
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (i, r) in rewards.iter().enumerate().rev() {
        acc = r + discount * acc;
        out[i] = acc;
    }
    Ok(out)
}

/// Common interface of the two environments.
pub trait Environment: Send {
    fn num_agents(&self) -> usize;

    /// Number of steps in one episode.
    fn horizon(&self) -> usize;

    fn lattice(&self) -> &Lattice;

    /// Starts a new episode and returns its first state.
    fn reset(&mut self) -> Result<&WorldState>;

    fn state(&self) -> &WorldState;

    /// Diagnostics of the current slot.
    fn info(&self) -> StepInfo;

    fn step(&mut self, actions: &[Action]) -> Result<StepOutcome>;

    /// Egocentric crop plus pooled global map for `agent`.
    fn observe(&self, agent: usize, window: usize, coarse_factor: usize) -> Result<Observation>;

    /// Factor that maps the observed field channel to roughly unit scale.
    fn field_scale(&self) -> f64;

    /// Factor that maps per-step rewards to roughly unit scale for learners.
    fn reward_scale(&self) -> f64 {
        1.0
    }
}
