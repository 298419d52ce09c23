use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::env::{Action, Environment, Experience, Scheduler, NUM_ACTIONS};
use crate::error::{Error, Result};
use crate::neural::{NeuralScheduler, ParameterSet};
use crate::tabular::{TabularMode, TabularScheduler};

/// A scheduler whose learned state can be written to disk.
pub trait Agent: Scheduler {
    /// Writes a checkpoint under `dir` and returns the file `evaluate` expects.
    fn save(&self, dir: &Path) -> Result<PathBuf>;
}

/// Builds agents of one algorithm.
pub trait Strategy: Send + Sync {
    fn id(&self) -> &str;

    fn build(&self, cfg: &ExperimentConfig, env: &dyn Environment, seed: u64) -> Result<Box<dyn Agent>>;

    fn restore(
        &self,
        cfg: &ExperimentConfig,
        env: &dyn Environment,
        checkpoint: &Path,
        seed: u64,
    ) -> Result<Box<dyn Agent>>;
}

/// Algorithms by id.
pub struct Registry {
    strategies: BTreeMap<String, Box<dyn Strategy>>,
}

impl Default for Registry {
    /// `random`, `q-single`, `q-multi`, `ac` and `magcdrl`.
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(RandomStrategy));
        r.register(Box::new(TabularStrategy(TabularMode::Single)));
        r.register(Box::new(TabularStrategy(TabularMode::Multi)));
        r.register(Box::new(NeuralStrategy::independent()));
        r.register(Box::new(NeuralStrategy::attention()));
        r
    }
}

impl Registry {
    pub fn empty() -> Self {
        Self {
            strategies: BTreeMap::new(),
        }
    }

    /// Adds `s`, replacing any strategy with the same id.
    pub fn register(&mut self, s: Box<dyn Strategy>) {
        self.strategies.insert(s.id().to_string(), s);
    }

    pub fn get(&self, id: &str) -> Result<&dyn Strategy> {
        self.strategies.get(id).map(|s| s.as_ref()).ok_or_else(|| {
            Error::config(format!(
                "unknown algorithm {id:?} (known: {})",
                self.ids().collect::<Vec<_>>().join(", ")
            ))
        })
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.strategies.keys().map(String::as_str)
    }
}

/// Uniform random moves; the floor every learner is compared against.
pub struct RandomScheduler {
    rng: ChaCha8Rng,
}

impl RandomScheduler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Scheduler for RandomScheduler {
    fn name(&self) -> &str {
        "random"
    }

    fn act(&mut self, env: &dyn Environment, _explore: bool) -> Result<Vec<Action>> {
        (0..env.num_agents())
            .map(|_| Action::new(self.rng.gen_range(0..NUM_ACTIONS)))
            .collect()
    }

    fn record(&mut self, _env: &dyn Environment, _exp: &Experience, _learn: bool) -> Result<()> {
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct RandomCheckpoint {
    algo: String,
}

const RANDOM_CHECKPOINT: &str = "random.json";

impl Agent for RandomScheduler {
    fn save(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(RANDOM_CHECKPOINT);
        let text = serde_json::to_string(&RandomCheckpoint { algo: "random".into() })?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

struct RandomStrategy;

impl Strategy for RandomStrategy {
    fn id(&self) -> &str {
        "random"
    }

    fn build(&self, _cfg: &ExperimentConfig, _env: &dyn Environment, seed: u64) -> Result<Box<dyn Agent>> {
        Ok(Box::new(RandomScheduler::new(seed)))
    }

    fn restore(
        &self,
        _cfg: &ExperimentConfig,
        _env: &dyn Environment,
        checkpoint: &Path,
        seed: u64,
    ) -> Result<Box<dyn Agent>> {
        let text = std::fs::read_to_string(checkpoint).map_err(|e| Error::io(checkpoint, e))?;
        let c: RandomCheckpoint = serde_json::from_str(&text)?;
        if c.algo != "random" {
            return Err(Error::format("random checkpoint", format!("written by {:?}", c.algo)));
        }
        Ok(Box::new(RandomScheduler::new(seed)))
    }
}

impl Agent for TabularScheduler {
    fn save(&self, dir: &Path) -> Result<PathBuf> {
        TabularScheduler::save(self, &dir.join("tabular"))
    }
}

struct TabularStrategy(TabularMode);

impl Strategy for TabularStrategy {
    fn id(&self) -> &str {
        self.0.name()
    }

    fn build(&self, cfg: &ExperimentConfig, env: &dyn Environment, seed: u64) -> Result<Box<dyn Agent>> {
        Ok(Box::new(TabularScheduler::new(
            self.0,
            env.num_agents(),
            cfg.tabular.clone(),
            seed,
        )?))
    }

    fn restore(
        &self,
        cfg: &ExperimentConfig,
        env: &dyn Environment,
        checkpoint: &Path,
        seed: u64,
    ) -> Result<Box<dyn Agent>> {
        let s = TabularScheduler::load(checkpoint, cfg.tabular.clone(), seed)?;
        if s.mode() != self.0 || s.agents() != env.num_agents() {
            return Err(Error::format(
                "tabular checkpoint",
                format!("{} with {} agents, expected {} with {}", s.mode().name(), s.agents(), self.0.name(), env.num_agents()),
            ));
        }
        Ok(Box::new(s))
    }
}

impl Agent for NeuralScheduler {
    fn save(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("policy.magc");
        NeuralScheduler::save(self, &path)?;
        Ok(path)
    }
}

/// Actor-critic family. `ac` learns one untied network per agent without message
/// passing; `magcdrl` shares weights (unless configured otherwise) and attends over
/// the other agents' features.
struct NeuralStrategy {
    id: &'static str,
    communicate: bool,
}

impl NeuralStrategy {
    fn independent() -> Self {
        Self {
            id: "ac",
            communicate: false,
        }
    }

    fn attention() -> Self {
        Self {
            id: "magcdrl",
            communicate: true,
        }
    }

    fn fresh(&self, cfg: &ExperimentConfig, env: &dyn Environment, seed: u64) -> Result<NeuralScheduler> {
        let mut n = cfg.neural.clone();
        n.communicate = self.communicate;
        if !self.communicate {
            n.tied = false;
        }
        NeuralScheduler::new(self.id, n, env, seed)
    }
}

impl Strategy for NeuralStrategy {
    fn id(&self) -> &str {
        self.id
    }

    fn build(&self, cfg: &ExperimentConfig, env: &dyn Environment, seed: u64) -> Result<Box<dyn Agent>> {
        Ok(Box::new(self.fresh(cfg, env, seed)?))
    }

    fn restore(
        &self,
        cfg: &ExperimentConfig,
        env: &dyn Environment,
        checkpoint: &Path,
        seed: u64,
    ) -> Result<Box<dyn Agent>> {
        let params = ParameterSet::load(checkpoint)?;
        Ok(Box::new(self.fresh(cfg, env, seed)?.with_params(params)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_registry_lists_five_algorithms() {
        let r = Registry::default();
        let ids: Vec<_> = r.ids().collect();
        assert_eq!(ids, ["ac", "magcdrl", "q-multi", "q-single", "random"]);
        for id in ids {
            assert_eq!(r.get(id).unwrap().id(), id);
        }
        let err = r.get("dqn").err().unwrap();
        assert!(err.is_config());
    }

    #[test]
    fn built_agents_report_their_id() {
        let cfg = ExperimentConfig {
            uavs: 2,
            vehicles: 10,
            ..Default::default()
        };
        let env = cfg.environment().unwrap();
        let r = Registry::default();
        for id in r.ids() {
            let a = r.get(id).unwrap().build(&cfg, env.as_ref(), 3).unwrap();
            assert_eq!(a.name(), id);
        }
    }
}
