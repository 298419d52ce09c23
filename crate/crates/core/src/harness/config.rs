use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::channel::RadioConfig;
use crate::env::{
    Environment, InitPolicy, Lattice, MapSource, MecEnv, MecModel, MonitorConfig, MonitorEnv,
    MonitorModel, OccupancyMap, ShortageGate,
};
use crate::error::{Error, Result};
use crate::neural::NeuralConfig;
use crate::qoe::QoeConfig;
use crate::tabular::TabularConfig;
use crate::traffic::{generate_grid_traces, read_trace_csv, GridSpec, LaneNetwork, TraceFrame};

/// Synthetic Manhattan grid with random-turn traffic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridScenario {
    pub rows: u32,
    pub cols: u32,
    pub block_length: f64,
    pub speed_limit: f64,
    /// Slots per episode; the trace has one more frame.
    pub horizon: usize,
}

impl Default for GridScenario {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            rows: g.rows,
            cols: g.cols,
            block_length: g.block_length,
            speed_limit: g.speed_limit,
            horizon: 20,
        }
    }
}

impl GridScenario {
    pub fn spec(&self) -> GridSpec {
        GridSpec {
            rows: self.rows,
            cols: self.cols,
            block_length: self.block_length,
            speed_limit: self.speed_limit,
        }
    }
}

/// Recorded traffic. Paths are relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceScenario {
    pub path: PathBuf,
    /// Lane network, needed only for the shortage gate.
    #[serde(default)]
    pub network: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    Grid(GridScenario),
    Trace(TraceScenario),
    /// Persistent monitoring; see [`ExperimentConfig::monitor`].
    Monitor,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario::Grid(GridScenario::default())
    }
}

/// One experiment. Every omitted field takes its default, which follows the
/// simulation parameters of the original study where it gives one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub lattice: Lattice,
    /// Number of UAVs (agents).
    pub uavs: usize,
    /// Number of vehicles in generated traces.
    pub vehicles: usize,
    pub radio: RadioConfig,
    pub qoe: QoeConfig,
    /// Horizontal UAV coverage radius, metres.
    pub coverage_radius: f64,
    pub init: InitPolicy,
    /// Block density (vehicles/m) above which UAVs serve. Unset means always.
    pub shortage_threshold: Option<f64>,
    pub monitor: MonitorConfig,
    pub algo: String,
    pub tabular: TabularConfig,
    pub neural: NeuralConfig,
    pub episodes: usize,
    /// Greedy episodes played by `evaluate`.
    pub eval_episodes: usize,
    pub seed: u64,
    /// Runs per value in a sweep.
    pub repetitions: usize,
    /// Record wall-clock time per episode. Off by default so reruns are byte-identical.
    pub timing: bool,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::default(),
            lattice: Lattice::default(),
            uavs: 5,
            vehicles: 100,
            radio: RadioConfig::default(),
            qoe: QoeConfig::default(),
            coverage_radius: 150.0,
            init: InitPolicy::default(),
            shortage_threshold: None,
            monitor: MonitorConfig::default(),
            algo: "magcdrl".into(),
            tabular: TabularConfig::default(),
            neural: NeuralConfig::default(),
            episodes: 5000,
            eval_episodes: 10,
            seed: 0,
            repetitions: 1,
            timing: false,
            base_dir: PathBuf::new(),
        }
    }
}

/// Stream offsets so traces, environment and learner draw independent numbers.
const TRACE_STREAM: u64 = 0x7472_6163_6573;
const ENV_STREAM: u64 = 0x656e_7669_726f;

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let ctx = |e: Error| Error::ConfigFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        let f = File::open(path).map_err(|e| ctx(Error::io(path, e)))?;
        let mut cfg: Self = serde_json::from_reader(BufReader::new(f)).map_err(|e| ctx(e.into()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate().map_err(ctx)?;
        cfg.check_files().map_err(ctx)?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.uavs == 0 {
            return Err(Error::config("uavs must be at least 1"));
        }
        if self.algo.is_empty() {
            return Err(Error::config("algo must be set"));
        }
        if self.episodes == 0 {
            return Err(Error::config("episodes must be at least 1"));
        }
        if self.repetitions == 0 {
            return Err(Error::config("repetitions must be at least 1"));
        }
        self.tabular.validate()?;
        self.neural.validate()?;
        match &self.scenario {
            Scenario::Monitor => self.monitor.validate(),
            Scenario::Grid(_) | Scenario::Trace(_) => {
                self.lattice.validate()?;
                self.radio.validate()?;
                self.qoe.validate()?;
                if !(self.coverage_radius > 0.0) {
                    return Err(Error::config("coverage_radius must be positive"));
                }
                if self.shortage_threshold.is_some_and(|t| !(t > 0.0)) {
                    return Err(Error::config("shortage_threshold must be positive"));
                }
                if self.vehicles == 0 {
                    return Err(Error::config("vehicles must be at least 1"));
                }
                Ok(())
            }
        }
    }

    fn check_files(&self) -> Result<()> {
        let mut files = Vec::new();
        match &self.scenario {
            Scenario::Trace(t) => {
                files.push(&t.path);
                files.extend(&t.network);
            }
            Scenario::Monitor => {
                if let MapSource::File { path } = &self.monitor.map {
                    files.push(path);
                }
            }
            Scenario::Grid(_) => {}
        }
        for f in files {
            let p = self.resolve(f);
            if !p.is_file() {
                return Err(Error::config(format!("referenced file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn trace_seed(&self) -> u64 {
        self.seed ^ TRACE_STREAM
    }

    pub fn env_seed(&self) -> u64 {
        self.seed ^ ENV_STREAM
    }

    /// Trace frames and the lane network (when one is known) of a traffic scenario.
    pub fn traffic(&self) -> Result<(Vec<TraceFrame>, Option<LaneNetwork>)> {
        match &self.scenario {
            Scenario::Grid(g) => {
                let spec = g.spec();
                let frames = generate_grid_traces(&spec, self.vehicles, g.horizon, self.trace_seed())?;
                Ok((frames, Some(spec.network())))
            }
            Scenario::Trace(t) => {
                let path = self.resolve(&t.path);
                let f = File::open(&path).map_err(|e| Error::io(&path, e))?;
                let frames = read_trace_csv(BufReader::new(f))?;
                let net = t
                    .network
                    .as_ref()
                    .map(|n| LaneNetwork::from_json_file(&self.resolve(n)))
                    .transpose()?;
                Ok((frames, net))
            }
            Scenario::Monitor => Err(Error::config("monitoring scenario has no traffic")),
        }
    }

    pub fn mec_model(&self) -> Result<MecModel> {
        let (frames, net) = self.traffic()?;
        if frames.len() < 2 {
            return Err(Error::config("trace needs at least two frames"));
        }
        let shortage = match (self.shortage_threshold, net) {
            (None, _) => None,
            (Some(threshold), Some(network)) => Some(ShortageGate { network, threshold }),
            (Some(_), None) => {
                return Err(Error::config("shortage_threshold needs a lane network"));
            }
        };
        let model = MecModel {
            lattice: self.lattice,
            radio: self.radio.clone(),
            qoe: self.qoe,
            coverage_radius: self.coverage_radius,
            num_uavs: self.uavs,
            frames: Arc::new(frames),
            init: self.init.clone(),
            shortage,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn monitor_model(&self) -> Result<MonitorModel> {
        let map = match &self.monitor.map {
            MapSource::Grid { width, height } => OccupancyMap::open(*width, *height),
            MapSource::File { path } => OccupancyMap::load(&self.resolve(path))?,
        };
        MonitorModel::new(map, self.monitor.clone(), self.uavs)
    }

    /// Builds a fresh environment for this scenario.
    pub fn environment(&self) -> Result<Box<dyn Environment>> {
        Ok(match self.scenario {
            Scenario::Monitor => Box::new(MonitorEnv::new(Arc::new(self.monitor_model()?), self.env_seed())?),
            _ => Box::new(MecEnv::new(Arc::new(self.mec_model()?), self.env_seed())?),
        })
    }
}
