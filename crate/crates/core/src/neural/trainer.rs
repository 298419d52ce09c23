use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{a2c_update, A2cConfig, Architecture, Batch, LossReport, Momentum, NetworkConfig, ParameterSet, Policy, StepSample};
use crate::env::{run_episode, Action, EpisodeSummary, Environment, Experience, Observation, Scheduler};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuralConfig {
    pub network: NetworkConfig,
    pub a2c: A2cConfig,
    /// Joint steps collected before the first update.
    pub warmup: usize,
    /// Share one network across all agents.
    pub tied: bool,
    /// Exchange features through graph attention.
    pub communicate: bool,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        Self {
            network: NetworkConfig::default(),
            a2c: A2cConfig::default(),
            warmup: 10_000,
            tied: true,
            communicate: true,
        }
    }
}

impl NeuralConfig {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.a2c.validate()
    }

    pub fn architecture(&self, env: &dyn Environment) -> Result<Architecture> {
        let l = env.lattice();
        let networks = if self.tied { 1 } else { env.num_agents() };
        Architecture::for_grid(
            self.network.clone(),
            l.y_max as usize,
            l.x_max as usize,
            networks,
            self.communicate,
        )
    }
}

/// Actor-critic scheduler, with or without weight sharing and attention.
pub struct NeuralScheduler {
    name: String,
    policy: Policy,
    opt: Momentum,
    cfg: NeuralConfig,
    rng: ChaCha8Rng,
    collected: usize,
    steps: Vec<StepSample>,
    pending: Option<Vec<Observation>>,
    bootstrap: Option<Vec<Observation>>,
    updates: usize,
    last_report: Option<LossReport>,
}

impl NeuralScheduler {
    pub fn new(name: &str, cfg: NeuralConfig, env: &dyn Environment, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let arch = cfg.architecture(env)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = arch.init(&mut rng)?;
        Ok(Self {
            name: name.to_string(),
            opt: Momentum::new(params.len()),
            policy: Policy { arch, params },
            cfg,
            rng,
            collected: 0,
            steps: Vec::new(),
            pending: None,
            bootstrap: None,
            updates: 0,
            last_report: None,
        })
    }

    /// Replaces the parameters with `params`, which must match the layout.
    pub fn with_params(mut self, params: ParameterSet) -> Result<Self> {
        let expect = ParameterSet::new(self.policy.arch.layout())?;
        if params.segments() != expect.segments() {
            return Err(Error::format(
                "parameter checkpoint",
                "segment layout does not match the configured network",
            ));
        }
        self.policy.params = params;
        Ok(self)
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn collected(&self) -> usize {
        self.collected
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn last_report(&self) -> Option<LossReport> {
        self.last_report
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.policy.params.save(path)
    }

    /// Observations of every agent with the field channel rescaled to unit range.
    pub fn observations(&self, env: &dyn Environment) -> Result<Vec<Observation>> {
        let (w, f) = (self.cfg.network.window, self.cfg.network.coarse_factor);
        let scale = env.field_scale();
        (0..env.num_agents())
            .map(|m| {
                let mut o = env.observe(m, w, f)?;
                o.local[..w * w].iter_mut().for_each(|v| *v *= scale);
                let g = o.global_height * o.global_width;
                o.global[..g].iter_mut().for_each(|v| *v *= scale);
                Ok(o)
            })
            .collect()
    }
}

impl Scheduler for NeuralScheduler {
    fn name(&self) -> &str {
        &self.name
    }

    fn begin_episode(&mut self, _episode: usize, _episodes: usize, env: &dyn Environment) -> Result<()> {
        let expect = if self.cfg.tied { env.num_agents() } else { self.policy.arch.networks };
        if expect != env.num_agents() {
            return Err(Error::invalid(format!(
                "network built for {} agents, environment has {}",
                self.policy.arch.networks,
                env.num_agents()
            )));
        }
        self.steps.clear();
        Ok(())
    }

    fn act(&mut self, env: &dyn Environment, explore: bool) -> Result<Vec<Action>> {
        let obs = self.observations(env)?;
        let (out, _) = self.policy.outputs(&obs)?;
        let actions = out
            .iter()
            .map(|o| {
                let index = if explore {
                    let u: f64 = self.rng.gen();
                    let mut acc = 0.0;
                    let mut pick = o.probs.len() - 1;
                    for (i, p) in o.probs.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            pick = i;
                            break;
                        }
                    }
                    pick
                } else {
                    let mut best = 0;
                    for (i, &p) in o.probs.iter().enumerate() {
                        if p > o.probs[best] {
                            best = i;
                        }
                    }
                    best
                };
                Action::new(index)
            })
            .collect::<Result<_>>()?;
        self.pending = Some(obs);
        Ok(actions)
    }

    fn record(&mut self, env: &dyn Environment, exp: &Experience, learn: bool) -> Result<()> {
        let obs = self.pending.take();
        if learn {
            let observations = obs.ok_or_else(|| Error::invalid("record called before act"))?;
            self.steps.push(StepSample {
                observations,
                actions: exp.actions.clone(),
                reward: exp.reward * env.reward_scale(),
            });
            self.collected += 1;
            if exp.done && self.cfg.a2c.n_step > 0 {
                self.bootstrap = Some(self.observations(env)?);
            }
        }
        Ok(())
    }

    fn end_episode(&mut self, _summary: &EpisodeSummary, learn: bool) -> Result<()> {
        let steps = std::mem::take(&mut self.steps);
        let bootstrap = self.bootstrap.take();
        if learn && self.collected >= self.cfg.warmup && !steps.is_empty() {
            let mut batch = Batch::new(steps, self.cfg.a2c.discount)?;
            if let Some(obs) = bootstrap {
                batch = batch.with_bootstrap(obs);
            }
            let report = a2c_update(&mut self.policy, &mut self.opt, &batch, &self.cfg.a2c)?;
            self.updates += 1;
            self.last_report = Some(report);
        }
        Ok(())
    }
}

/// Result of [`train_magcdrl`].
pub struct NeuralRun {
    pub scheduler: NeuralScheduler,
    pub log: Vec<EpisodeSummary>,
}

/// Trains a fresh network on `env` for `episodes` episodes.
pub fn train_magcdrl(env: &mut dyn Environment, cfg: NeuralConfig, episodes: usize, seed: u64) -> Result<NeuralRun> {
    if episodes == 0 {
        return Err(Error::config("episodes must be at least 1"));
    }
    let name = if cfg.communicate { "magcdrl" } else { "ac" };
    let mut scheduler = NeuralScheduler::new(name, cfg, env, seed)?;
    let log = (0..episodes)
        .map(|e| run_episode(env, &mut scheduler, e, episodes, true))
        .collect::<Result<_>>()?;
    Ok(NeuralRun { scheduler, log })
}
