//! Persistent monitoring: every grid cell accrues a penalty while nobody watches it.

use std::path::PathBuf;
use std::sync::Arc;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    observe, Action, Cell, Environment, FieldGrid, Lattice, Observation, OccupancyMap, StepInfo,
    StepOutcome, WorldState,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSource {
    Grid { width: usize, height: usize },
    /// Occupancy text file, relative to the experiment config.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorConfig {
    /// Coverage radius in cells (Euclidean).
    pub coverage_radius: f64,
    /// Penalty added to an unobserved cell each slot.
    pub decay: f64,
    /// Penalties never drop below `-penalty_cap`.
    pub penalty_cap: f64,
    pub map: MapSource,
    /// Slots per episode.
    pub horizon: usize,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            coverage_radius: 1.0,
            decay: 1.0,
            penalty_cap: 10.0,
            map: MapSource::Grid {
                width: 8,
                height: 8,
            },
            horizon: 40,
        }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.coverage_radius >= 1.0) {
            return Err(Error::config("monitor.coverage_radius must be at least 1"));
        }
        if !(self.decay >= 0.0) {
            return Err(Error::config("monitor.decay must be non-negative"));
        }
        if !(self.penalty_cap > 0.0) {
            return Err(Error::config("monitor.penalty_cap must be positive"));
        }
        if self.horizon == 0 {
            return Err(Error::config("monitor.horizon must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MonitorModel {
    pub map: OccupancyMap,
    pub cfg: MonitorConfig,
    pub num_agents: usize,
    lattice: Lattice,
}

impl MonitorModel {
    pub fn new(map: OccupancyMap, cfg: MonitorConfig, num_agents: usize) -> Result<Self> {
        cfg.validate()?;
        if num_agents == 0 {
            return Err(Error::config("at least one agent is required"));
        }
        if map.free_cells().count() < num_agents {
            return Err(Error::config("not enough free cells for the agents"));
        }
        let lattice = Lattice::new(map.width as u16, map.height as u16, 1, 2.0)?;
        Ok(Self {
            map,
            cfg,
            num_agents,
            lattice,
        })
    }

    pub fn initial_state(&self, cells: Vec<Cell>) -> WorldState {
        WorldState {
            uav_cells: cells,
            frame_index: 0,
            last_mos: 0.0,
            monitor_penalties: Some(vec![0.0; self.map.len()]),
        }
    }

    fn covered(&self, cells: &[Cell], x: usize, y: usize) -> bool {
        let r2 = self.cfg.coverage_radius * self.cfg.coverage_radius;
        cells.iter().any(|c| {
            let dx = c.x as f64 - x as f64;
            let dy = c.y as f64 - y as f64;
            dx * dx + dy * dy <= r2
        })
    }

    fn apply(&self, c: Cell, a: Action) -> Cell {
        let (dx, dy) = a.planar_direction();
        let x = (c.x as i32 + dx).clamp(0, self.map.width as i32 - 1) as usize;
        let y = (c.y as i32 + dy).clamp(0, self.map.height as i32 - 1) as usize;
        if self.map.is_obstacle(x, y) {
            c
        } else {
            Cell::new(x as u16, y as u16, 0)
        }
    }
}

/// One monitoring slot: agents move (blocked moves stay put), covered cells reset to 0,
/// all others decay toward `-penalty_cap`. The shared reward is the grid sum.
pub fn step_monitor(
    model: &MonitorModel,
    state: &WorldState,
    actions: &[Action],
) -> Result<StepOutcome> {
    if actions.len() != state.uav_cells.len() {
        return Err(Error::invalid(format!(
            "expected {} actions, got {}",
            state.uav_cells.len(),
            actions.len()
        )));
    }
    let penalties = state
        .monitor_penalties
        .as_ref()
        .ok_or_else(|| Error::invalid("state carries no penalty grid"))?;
    let cells: Vec<Cell> = state
        .uav_cells
        .iter()
        .zip(actions)
        .map(|(&c, &a)| model.apply(c, a))
        .collect();
    let (w, cap, decay) = (model.map.width, model.cfg.penalty_cap, model.cfg.decay);
    let next: Vec<f64> = penalties
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if model.covered(&cells, i % w, i / w) {
                0.0
            } else {
                (p - decay).max(-cap)
            }
        })
        .collect();
    let reward = next.iter().sum();
    let frame_index = state.frame_index + 1;
    Ok(StepOutcome {
        state: WorldState {
            uav_cells: cells,
            frame_index,
            last_mos: 0.0,
            monitor_penalties: Some(next),
        },
        reward,
        done: frame_index >= model.cfg.horizon,
        info: StepInfo::default(),
    })
}

pub struct MonitorEnv {
    model: Arc<MonitorModel>,
    state: WorldState,
    rng: ChaCha8Rng,
}

impl MonitorEnv {
    pub fn new(model: Arc<MonitorModel>, seed: u64) -> Result<Self> {
        let mut env = Self {
            state: model.initial_state(Vec::new()),
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        env.reset()?;
        Ok(env)
    }

    pub fn model(&self) -> &MonitorModel {
        &self.model
    }

    pub fn reset_to(&mut self, cells: Vec<Cell>) -> Result<&WorldState> {
        let m = &self.model;
        if cells.len() != m.num_agents
            || !cells.iter().all(|c| {
                (c.x as usize) < m.map.width
                    && (c.y as usize) < m.map.height
                    && !m.map.is_obstacle(c.x as usize, c.y as usize)
            })
        {
            return Err(Error::invalid("reset_to: one free cell per agent required"));
        }
        self.state = m.initial_state(cells);
        Ok(&self.state)
    }
}

impl Environment for MonitorEnv {
    fn num_agents(&self) -> usize {
        self.model.num_agents
    }

    fn horizon(&self) -> usize {
        self.model.cfg.horizon
    }

    fn lattice(&self) -> &Lattice {
        &self.model.lattice
    }

    /// Agents start on distinct random free cells; all penalties start at 0.
    fn reset(&mut self) -> Result<&WorldState> {
        let free: Vec<(usize, usize)> = self.model.map.free_cells().collect();
        let cells = index::sample(&mut self.rng, free.len(), self.model.num_agents)
            .into_iter()
            .map(|i| Cell::new(free[i].0 as u16, free[i].1 as u16, 0))
            .collect();
        self.reset_to(cells)
    }

    fn state(&self) -> &WorldState {
        &self.state
    }

    fn info(&self) -> StepInfo {
        StepInfo::default()
    }

    fn step(&mut self, actions: &[Action]) -> Result<StepOutcome> {
        let out = step_monitor(&self.model, &self.state, actions)?;
        self.state = out.state.clone();
        Ok(out)
    }

    fn observe(&self, agent: usize, window: usize, coarse_factor: usize) -> Result<Observation> {
        let m = &self.model.map;
        let field = FieldGrid {
            width: m.width,
            height: m.height,
            values: self.state.monitor_penalties.clone().unwrap_or_default(),
        };
        let positions: Vec<(usize, usize)> = self
            .state
            .uav_cells
            .iter()
            .map(|c| (c.x as usize, c.y as usize))
            .collect();
        observe(&field, &m.mask(), &positions, agent, window, coarse_factor)
    }

    fn field_scale(&self) -> f64 {
        1.0 / self.model.cfg.penalty_cap
    }

    fn reward_scale(&self) -> f64 {
        1.0 / (self.model.map.len() as f64 * self.model.cfg.penalty_cap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn env(cfg: MonitorConfig, n: usize, map: OccupancyMap) -> MonitorEnv {
        MonitorEnv::new(Arc::new(MonitorModel::new(map, cfg, n).unwrap()), 1).unwrap()
    }

    #[test]
    fn full_coverage_gives_zero_reward() {
        let cfg = MonitorConfig {
            coverage_radius: 20.0,
            ..MonitorConfig::default()
        };
        let mut e = env(cfg, 1, OccupancyMap::open(8, 8));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            let a = Action::new(rng.gen_range(0..9)).unwrap();
            assert_eq!(e.step(&[a]).unwrap().reward, 0.0);
        }
    }

    #[test]
    fn far_cell_accumulates_closed_form() {
        let cfg = MonitorConfig {
            decay: 0.75,
            penalty_cap: 4.0,
            horizon: 100,
            ..MonitorConfig::default()
        };
        let mut e = env(cfg, 1, OccupancyMap::open(8, 8));
        e.reset_to(vec![Cell::new(0, 0, 0)]).unwrap();
        for k in 1..=12 {
            let out = e.step(&[Action::STAY]).unwrap();
            let p = out.state.monitor_penalties.as_ref().unwrap()[7 * 8 + 7];
            assert_eq!(p, (-(k as f64) * 0.75).max(-4.0));
        }
    }

    #[test]
    fn zero_decay_is_free() {
        let cfg = MonitorConfig {
            decay: 0.0,
            ..MonitorConfig::default()
        };
        let mut e = env(cfg, 2, OccupancyMap::open(8, 8));
        for _ in 0..20 {
            assert_eq!(e.step(&[Action::STAY, Action::new(3).unwrap()]).unwrap().reward, 0.0);
        }
    }

    #[test]
    fn obstacles_block_moves() {
        let map = OccupancyMap::parse("...\n.#.\n...\n").unwrap();
        let mut e = env(MonitorConfig::default(), 1, map);
        e.reset_to(vec![Cell::new(0, 0, 0)]).unwrap();
        // (+1, +1) would land on the obstacle.
        let out = e.step(&[Action::new(0).unwrap()]).unwrap();
        assert_eq!(out.state.uav_cells[0], Cell::new(0, 0, 0));
        assert!(e.reset_to(vec![Cell::new(1, 1, 0)]).is_err());
    }

    #[test]
    fn episode_ends_at_horizon() {
        let cfg = MonitorConfig {
            horizon: 3,
            ..MonitorConfig::default()
        };
        let mut e = env(cfg, 1, OccupancyMap::open(4, 4));
        let dones: Vec<bool> = (0..3).map(|_| e.step(&[Action::STAY]).unwrap().done).collect();
        assert_eq!(dones, vec![false, false, true]);
    }
}
