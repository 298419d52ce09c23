use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    epsilon_greedy, joint_code, opponent_weighted_value, q_update_with, table::max_of, EpsilonSchedule,
    OpponentModel, QTable, StateKey,
};
use crate::env::{
    run_episode, Action, Cell, EpisodeSummary, Environment, Experience, Scheduler, NUM_ACTIONS,
};
use crate::error::{Error, Result};

/// Which state each agent conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TabularMode {
    /// Own cell only; other UAVs are part of the environment.
    #[serde(rename = "q-single")]
    Single,
    /// Joint cells, with Q over joint actions weighted by an opponent model.
    #[serde(rename = "q-multi")]
    Multi,
}

impl TabularMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Single => "q-single",
            Self::Multi => "q-multi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabularConfig {
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon: EpsilonSchedule,
    /// Relative score gain over the episode start that marks a successful trajectory.
    pub success_threshold: f64,
    /// End the episode as soon as it succeeds.
    pub stop_on_success: bool,
}

impl Default for TabularConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            discount: 0.9,
            epsilon: EpsilonSchedule::default(),
            success_threshold: 0.1,
            stop_on_success: false,
        }
    }
}

impl TabularConfig {
    pub fn validate(&self) -> Result<()> {
        QTable::new(self.learning_rate, self.discount)?;
        self.epsilon.validate()?;
        if !(self.success_threshold.is_finite() && self.success_threshold >= 0.0) {
            return Err(Error::config("success_threshold must be non-negative"));
        }
        Ok(())
    }
}

/// Joint positions of an episode that reached the success threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessTrajectory {
    pub episode: usize,
    pub gain: f64,
    pub cells: Vec<Vec<Cell>>,
}

/// Independent or opponent-modelling Q-learners, one table per UAV.
pub struct TabularScheduler {
    mode: TabularMode,
    cfg: TabularConfig,
    tables: Vec<QTable>,
    opponents: Vec<OpponentModel>,
    rng: ChaCha8Rng,
    epsilon: f64,
    episode: usize,
    start_mos: f64,
    trajectory: Vec<Vec<Cell>>,
    succeeded: bool,
    success: Vec<SuccessTrajectory>,
    best: Option<(f64, Vec<Cell>)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    algo: TabularMode,
    agents: usize,
    learning_rate: f64,
    discount: f64,
    tables: Vec<String>,
    opponents: Vec<String>,
    deployment: Option<Vec<Cell>>,
    best_mos: Option<f64>,
}

const MANIFEST_FORMAT: &str = "tabular-q";
pub const TABULAR_MANIFEST: &str = "tabular.json";

impl TabularScheduler {
    pub fn new(mode: TabularMode, agents: usize, cfg: TabularConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if agents == 0 {
            return Err(Error::config("at least one agent is required"));
        }
        let opponents = match mode {
            TabularMode::Single => 0,
            TabularMode::Multi => agents - 1,
        };
        Ok(Self {
            tables: (0..agents)
                .map(|_| QTable::new(cfg.learning_rate, cfg.discount))
                .collect::<Result<_>>()?,
            opponents: (0..agents).map(|_| OpponentModel::new(opponents)).collect(),
            mode,
            epsilon: cfg.epsilon.start,
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
            episode: 0,
            start_mos: 0.0,
            trajectory: Vec::new(),
            succeeded: false,
            success: Vec::new(),
            best: None,
        })
    }

    pub fn mode(&self) -> TabularMode {
        self.mode
    }

    pub fn agents(&self) -> usize {
        self.tables.len()
    }

    pub fn tables(&self) -> &[QTable] {
        &self.tables
    }

    pub fn opponent_models(&self) -> &[OpponentModel] {
        &self.opponents
    }

    pub fn success_set(&self) -> &[SuccessTrajectory] {
        &self.success
    }

    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    /// Highest-scoring joint position visited so far, with its score. Earlier visits
    /// win ties.
    pub fn deployment(&self) -> Option<(&[Cell], f64)> {
        self.best.as_ref().map(|(m, c)| (c.as_slice(), *m))
    }

    pub fn state_key(&self, cells: &[Cell], agent: usize) -> StateKey {
        match self.mode {
            TabularMode::Single => StateKey(vec![cells[agent]]),
            TabularMode::Multi => StateKey(cells.to_vec()),
        }
    }

    /// Action values agent `agent` acts on in joint position `cells`.
    pub fn action_values(&self, cells: &[Cell], agent: usize) -> [f64; NUM_ACTIONS] {
        let s = self.state_key(cells, agent);
        opponent_weighted_value(&self.tables[agent], &self.opponents[agent], &s)
    }

    fn note_position(&mut self, mos: f64, cells: &[Cell]) {
        if self.best.as_ref().is_none_or(|(m, _)| mos > *m) {
            self.best = Some((mos, cells.to_vec()));
        }
    }

    fn learn(&mut self, exp: &Experience) -> Result<()> {
        for i in 0..self.tables.len() {
            let s = self.state_key(&exp.state.uav_cells, i);
            let s_next = self.state_key(&exp.next_state.uav_cells, i);
            let others: Vec<Action> = exp
                .actions
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &a)| a)
                .collect();
            let (code, next_max) = match self.mode {
                TabularMode::Single => (
                    exp.actions[i].index() as u64,
                    self.tables[i].max_value(&s_next),
                ),
                TabularMode::Multi => (
                    joint_code(exp.actions[i], &others),
                    max_of(&opponent_weighted_value(&self.tables[i], &self.opponents[i], &s_next)),
                ),
            };
            // Episodes end on a time limit, not in an absorbing state, so the update
            // always bootstraps.
            q_update_with(&mut self.tables[i], &s, code, exp.reward, next_max);
            if self.mode == TabularMode::Multi {
                self.opponents[i].observe(&s, &others)?;
            }
        }
        Ok(())
    }

    /// Writes the manifest and per-agent CSV files into `dir`; returns the manifest path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut tables = Vec::new();
        let mut opponents = Vec::new();
        for (i, (t, m)) in self.tables.iter().zip(&self.opponents).enumerate() {
            let tname = format!("q_{i}.csv");
            let path = dir.join(&tname);
            let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
            t.write_csv(BufWriter::new(f))?;
            tables.push(tname);
            if self.mode == TabularMode::Multi {
                let oname = format!("opponents_{i}.csv");
                let path = dir.join(&oname);
                let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
                m.write_csv(BufWriter::new(f))?;
                opponents.push(oname);
            }
        }
        let manifest = Manifest {
            format: MANIFEST_FORMAT.into(),
            version: 1,
            algo: self.mode,
            agents: self.tables.len(),
            learning_rate: self.cfg.learning_rate,
            discount: self.cfg.discount,
            tables,
            opponents,
            deployment: self.best.as_ref().map(|(_, c)| c.clone()),
            best_mos: self.best.as_ref().map(|(m, _)| *m),
        };
        let path = dir.join(TABULAR_MANIFEST);
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(f), &manifest)?;
        Ok(path)
    }

    /// Restores a scheduler written by [`TabularScheduler::save`].
    pub fn load(manifest_path: &Path, cfg: TabularConfig, seed: u64) -> Result<Self> {
        let dir = manifest_path.parent().unwrap_or(Path::new("."));
        let f = File::open(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
        let m: Manifest = serde_json::from_reader(BufReader::new(f))?;
        if m.format != MANIFEST_FORMAT || m.version != 1 {
            return Err(Error::format("tabular checkpoint", "unknown format or version"));
        }
        if m.tables.len() != m.agents {
            return Err(Error::format("tabular checkpoint", "table count does not match agents"));
        }
        let cfg = TabularConfig {
            learning_rate: m.learning_rate,
            discount: m.discount,
            ..cfg
        };
        let mut s = Self::new(m.algo, m.agents, cfg, seed)?;
        for (i, name) in m.tables.iter().enumerate() {
            let path = dir.join(name);
            let f = File::open(&path).map_err(|e| Error::io(&path, e))?;
            s.tables[i] = QTable::read_csv(BufReader::new(f), m.learning_rate, m.discount)?;
        }
        for (i, name) in m.opponents.iter().enumerate() {
            let path = dir.join(name);
            let f = File::open(&path).map_err(|e| Error::io(&path, e))?;
            s.opponents[i] = OpponentModel::read_csv(BufReader::new(f), m.agents - 1)?;
        }
        s.best = m.best_mos.zip(m.deployment);
        Ok(s)
    }
}

impl Scheduler for TabularScheduler {
    fn name(&self) -> &str {
        self.mode.name()
    }

    fn begin_episode(&mut self, episode: usize, episodes: usize, env: &dyn Environment) -> Result<()> {
        if env.num_agents() != self.tables.len() {
            return Err(Error::invalid(format!(
                "environment has {} agents, scheduler {}",
                env.num_agents(),
                self.tables.len()
            )));
        }
        self.episode = episode;
        self.epsilon = self.cfg.epsilon.value(episode, episodes);
        let info = env.info();
        let cells = env.state().uav_cells.clone();
        self.start_mos = info.mos_total;
        self.succeeded = false;
        if info.vehicles > 0 {
            self.note_position(info.mos_total, &cells);
        }
        self.trajectory = vec![cells];
        Ok(())
    }

    fn act(&mut self, env: &dyn Environment, explore: bool) -> Result<Vec<Action>> {
        let cells = &env.state().uav_cells;
        let eps = if explore { self.epsilon } else { 0.0 };
        Ok((0..self.tables.len())
            .map(|i| {
                let v = self.action_values(cells, i);
                epsilon_greedy(&v, eps, &mut self.rng)
            })
            .collect())
    }

    fn record(&mut self, env: &dyn Environment, exp: &Experience, learn: bool) -> Result<()> {
        let info = env.info();
        let cells = &exp.next_state.uav_cells;
        self.trajectory.push(cells.clone());
        if learn {
            if info.vehicles > 0 {
                self.note_position(info.mos_total, cells);
            }
            self.learn(exp)?;
            if !self.succeeded && self.start_mos > 0.0 {
                let gain = (info.mos_total - self.start_mos) / self.start_mos;
                if gain >= self.cfg.success_threshold {
                    self.succeeded = true;
                    self.success.push(SuccessTrajectory {
                        episode: self.episode,
                        gain,
                        cells: self.trajectory.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    fn should_stop(&self) -> bool {
        self.cfg.stop_on_success && self.succeeded
    }
}

/// Result of [`train_tabular`].
pub struct TabularRun {
    pub scheduler: TabularScheduler,
    pub log: Vec<EpisodeSummary>,
}

/// Trains fresh Q-learners on `env` for `episodes` episodes.
pub fn train_tabular(
    env: &mut dyn Environment,
    mode: TabularMode,
    cfg: TabularConfig,
    episodes: usize,
    seed: u64,
) -> Result<TabularRun> {
    if episodes == 0 {
        return Err(Error::config("episodes must be at least 1"));
    }
    let mut scheduler = TabularScheduler::new(mode, env.num_agents(), cfg, seed)?;
    let log = (0..episodes)
        .map(|e| run_episode(env, &mut scheduler, e, episodes, true))
        .collect::<Result<_>>()?;
    Ok(TabularRun { scheduler, log })
}
