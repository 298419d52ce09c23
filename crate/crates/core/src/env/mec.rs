//! The edge-computing MDP: UAVs hop between lattice points while vehicles follow a
//! trace; each slot every vehicle is scored through the radio and QoE models.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    observe, Action, Cell, Environment, FieldGrid, Lattice, Observation, StepInfo, StepOutcome,
    WorldState,
};
use crate::channel::{self, Position, RadioConfig};
use crate::error::{Error, Result};
use crate::qoe::QoeConfig;
use crate::traffic::{detect_shortage, LaneNetwork, TraceFrame};

pub const REWARD_UP: f64 = 0.8;
pub const REWARD_TIE: f64 = -0.1;
pub const REWARD_DOWN: f64 = -0.8;
/// Score differences within this band count as "unchanged".
pub const MOS_TIE_TOLERANCE: f64 = 1e-9;

/// Where UAVs start each episode.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitPolicy {
    /// The lattice points farthest from the base station, in decreasing distance.
    Farthest,
    /// Uniformly random border points at the lowest level.
    #[default]
    Marginal,
    /// Uniformly random lattice points.
    Random,
    Fixed(Vec<Cell>),
}

/// Restricts UAV service to slots where some block is congested.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortageGate {
    pub network: LaneNetwork,
    pub threshold: f64,
}

#[derive(Debug, Clone)]
pub struct MecModel {
    pub lattice: Lattice,
    pub radio: RadioConfig,
    pub qoe: QoeConfig,
    /// Horizontal coverage radius of one UAV, metres.
    pub coverage_radius: f64,
    pub num_uavs: usize,
    pub frames: Arc<Vec<TraceFrame>>,
    pub init: InitPolicy,
    pub shortage: Option<ShortageGate>,
}

/// Scores of every vehicle in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameScore {
    pub per_vehicle: Vec<f64>,
    pub mos_total: f64,
    pub offloading_uavs: usize,
}

fn eq12(prev: f64, next: f64) -> f64 {
    if next > prev + MOS_TIE_TOLERANCE {
        REWARD_UP
    } else if next < prev - MOS_TIE_TOLERANCE {
        REWARD_DOWN
    } else {
        REWARD_TIE
    }
}

/// Serving UAV of every vehicle: the nearest UAV (horizontal distance) whose coverage
/// disc contains the vehicle, lowest index on ties; `None` means the base station.
pub fn assign_vehicles(
    lattice: &Lattice,
    cells: &[Cell],
    frame: &TraceFrame,
    coverage_radius: f64,
) -> Vec<Option<usize>> {
    let uavs: Vec<Position> = cells.iter().map(|&c| lattice.position(c, 0.0)).collect();
    frame
        .vehicles
        .iter()
        .map(|v| {
            let p = Position::ground(v.x, v.y);
            let mut best: Option<(usize, f64)> = None;
            for (i, u) in uavs.iter().enumerate() {
                let d = u.horizontal_distance(&p);
                if d <= coverage_radius && best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((i, d));
                }
            }
            best.map(|(i, _)| i)
        })
        .collect()
}

/// Number of UAVs serving at least one vehicle.
pub fn offloading_count(
    lattice: &Lattice,
    cells: &[Cell],
    frame: &TraceFrame,
    coverage_radius: f64,
) -> usize {
    let mut serving = vec![false; cells.len()];
    for i in assign_vehicles(lattice, cells, frame, coverage_radius)
        .into_iter()
        .flatten()
    {
        serving[i] = true;
    }
    serving.into_iter().filter(|&s| s).count()
}

impl MecModel {
    pub fn validate(&self) -> Result<()> {
        self.lattice.validate()?;
        self.radio.validate()?;
        self.qoe.validate()?;
        if self.num_uavs == 0 {
            return Err(Error::config("at least one UAV is required"));
        }
        if self.frames.is_empty() {
            return Err(Error::config("trace has no frames"));
        }
        if !(self.coverage_radius > 0.0) {
            return Err(Error::config("coverage radius must be positive"));
        }
        if let InitPolicy::Fixed(cells) = &self.init {
            if cells.len() != self.num_uavs || !cells.iter().all(|&c| self.lattice.contains(c)) {
                return Err(Error::config(
                    "fixed initial cells must list one in-lattice cell per UAV",
                ));
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.frames.len() - 1
    }

    fn uavs_active(&self, frame: &TraceFrame) -> Result<bool> {
        match &self.shortage {
            None => Ok(true),
            Some(g) => Ok(!detect_shortage(frame, &g.network, g.threshold)?.is_empty()),
        }
    }

    /// Scores slot `frame_index` with UAVs at `cells`.
    pub fn score(&self, cells: &[Cell], frame_index: usize) -> Result<FrameScore> {
        let frame = self
            .frames
            .get(frame_index)
            .ok_or_else(|| Error::invalid(format!("no trace frame {frame_index}")))?;
        let assignment = if self.uavs_active(frame)? {
            assign_vehicles(&self.lattice, cells, frame, self.coverage_radius)
        } else {
            vec![None; frame.vehicles.len()]
        };

        let mut load = vec![0usize; cells.len()];
        let mut bs_load = 0usize;
        for a in &assignment {
            match a {
                Some(i) => load[*i] += 1,
                None => bs_load += 1,
            }
        }

        let cfg = &self.radio;
        let bs = if bs_load > 0 {
            let snr = channel::bs_snr(bs_load, cfg)?;
            channel::transmission_ok(snr, cfg).then(|| channel::bs_throughput(bs_load, cfg))
        } else {
            None
        }
        .transpose()?;

        let mut per_vehicle = Vec::with_capacity(frame.vehicles.len());
        for (v, a) in frame.vehicles.iter().zip(&assignment) {
            let rate = match a {
                None => bs,
                Some(i) => {
                    let uav = self.lattice.position(cells[*i], cfg.uav_height);
                    let veh = Position::ground(v.x, v.y);
                    let d = channel::slant_distance(&uav, &veh)?;
                    let theta = channel::elevation_angle(&uav, &veh)?;
                    let gain = channel::channel_gain(d, theta, cfg)?;
                    let bw = cfg.bandwidth_uav / load[*i] as f64;
                    let snr = channel::uav_snr(cfg, gain, bw);
                    channel::transmission_ok(snr, cfg).then(|| channel::link_rate(bw, snr))
                }
            };
            per_vehicle.push(self.qoe.score(rate));
        }
        Ok(FrameScore {
            mos_total: per_vehicle.iter().sum(),
            per_vehicle,
            offloading_uavs: load.iter().filter(|&&n| n > 0).count(),
        })
    }

    pub fn initial_cells(&self, rng: &mut impl Rng) -> Vec<Cell> {
        let l = &self.lattice;
        match &self.init {
            InitPolicy::Fixed(cells) => cells.clone(),
            InitPolicy::Farthest => {
                let bs = self.radio.bs_position();
                let mut cells: Vec<(f64, Cell)> = l
                    .cells()
                    .map(|c| {
                        let d = channel::slant_distance(&l.position(c, self.radio.uav_height), &bs)
                            .unwrap_or(0.0);
                        (d, c)
                    })
                    .collect();
                cells.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                cells.iter().cycle().take(self.num_uavs).map(|&(_, c)| c).collect()
            }
            InitPolicy::Marginal => {
                let border: Vec<Cell> = l.cells().filter(|&c| c.z == 0 && l.on_border(c)).collect();
                (0..self.num_uavs)
                    .map(|_| *border.choose(rng).expect("lattice has a border"))
                    .collect()
            }
            InitPolicy::Random => (0..self.num_uavs)
                .map(|_| {
                    Cell::new(
                        rng.gen_range(0..l.x_max),
                        rng.gen_range(0..l.y_max),
                        rng.gen_range(0..l.z_max),
                    )
                })
                .collect(),
        }
    }

    /// Vehicle counts binned to the nearest planar lattice point.
    pub fn vehicle_field(&self, frame_index: usize) -> FieldGrid {
        let l = &self.lattice;
        let mut field = FieldGrid::zeros(l.x_max as usize, l.y_max as usize);
        let s = l.spacing();
        if let Some(frame) = self.frames.get(frame_index) {
            for v in &frame.vehicles {
                let x = ((v.x / s).round().max(0.0) as usize).min(field.width - 1);
                let y = ((v.y / s).round().max(0.0) as usize).min(field.height - 1);
                field.values[y * field.width + x] += 1.0;
            }
        }
        field
    }
}

/// One slot of the edge-computing MDP.
///
/// Each UAV moves by its action (clamped at the lattice border), the next trace frame
/// is scored, and the shared reward compares the new total score with the previous one.
pub fn step_mec(model: &MecModel, state: &WorldState, actions: &[Action]) -> Result<StepOutcome> {
    if actions.len() != state.uav_cells.len() {
        return Err(Error::invalid(format!(
            "expected {} actions, got {}",
            state.uav_cells.len(),
            actions.len()
        )));
    }
    let next_index = state.frame_index + 1;
    if next_index > model.horizon() {
        return Err(Error::invalid("episode already finished"));
    }
    let cells: Vec<Cell> = state
        .uav_cells
        .iter()
        .zip(actions)
        .map(|(&c, &a)| model.lattice.apply(c, a))
        .collect();
    let score = model.score(&cells, next_index)?;
    let reward = eq12(state.last_mos, score.mos_total);
    Ok(StepOutcome {
        state: WorldState {
            uav_cells: cells,
            frame_index: next_index,
            last_mos: score.mos_total,
            monitor_penalties: None,
        },
        reward,
        done: next_index == model.horizon(),
        info: StepInfo {
            mos_total: score.mos_total,
            vehicles: score.per_vehicle.len(),
            offloading_uavs: score.offloading_uavs,
        },
    })
}

/// Stateful wrapper around [`step_mec`].
pub struct MecEnv {
    model: Arc<MecModel>,
    state: WorldState,
    info: StepInfo,
    rng: ChaCha8Rng,
}

impl MecEnv {
    pub fn new(model: Arc<MecModel>, seed: u64) -> Result<Self> {
        model.validate()?;
        let mut env = Self {
            state: WorldState {
                uav_cells: Vec::new(),
                frame_index: 0,
                last_mos: 0.0,
                monitor_penalties: None,
            },
            info: StepInfo::default(),
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        env.reset()?;
        Ok(env)
    }

    pub fn model(&self) -> &MecModel {
        &self.model
    }

    /// Places the UAVs at `cells` at slot 0.
    pub fn reset_to(&mut self, cells: Vec<Cell>) -> Result<&WorldState> {
        if cells.len() != self.model.num_uavs || !cells.iter().all(|&c| self.model.lattice.contains(c)) {
            return Err(Error::invalid("reset_to: one in-lattice cell per UAV required"));
        }
        let score = self.model.score(&cells, 0)?;
        self.info = StepInfo {
            mos_total: score.mos_total,
            vehicles: score.per_vehicle.len(),
            offloading_uavs: score.offloading_uavs,
        };
        self.state = WorldState {
            uav_cells: cells,
            frame_index: 0,
            last_mos: score.mos_total,
            monitor_penalties: None,
        };
        Ok(&self.state)
    }
}

impl Environment for MecEnv {
    fn num_agents(&self) -> usize {
        self.model.num_uavs
    }

    fn horizon(&self) -> usize {
        self.model.horizon()
    }

    fn lattice(&self) -> &Lattice {
        &self.model.lattice
    }

    fn reset(&mut self) -> Result<&WorldState> {
        let cells = self.model.initial_cells(&mut self.rng);
        self.reset_to(cells)
    }

    fn state(&self) -> &WorldState {
        &self.state
    }

    fn info(&self) -> StepInfo {
        self.info
    }

    fn step(&mut self, actions: &[Action]) -> Result<StepOutcome> {
        let out = step_mec(&self.model, &self.state, actions)?;
        self.state = out.state.clone();
        self.info = out.info;
        Ok(out)
    }

    fn observe(&self, agent: usize, window: usize, coarse_factor: usize) -> Result<Observation> {
        let field = self.model.vehicle_field(self.state.frame_index);
        let obstacles = vec![0.0; field.values.len()];
        let positions: Vec<(usize, usize)> = self
            .state
            .uav_cells
            .iter()
            .map(|c| (c.x as usize, c.y as usize))
            .collect();
        observe(&field, &obstacles, &positions, agent, window, coarse_factor)
    }

    fn field_scale(&self) -> f64 {
        let vehicles = self.model.frames[0].vehicles.len().max(1) as f64;
        let points = (self.model.lattice.x_max as f64) * (self.model.lattice.y_max as f64);
        points / vehicles
    }
}
