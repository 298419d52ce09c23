use super::{Action, Environment, Experience};
use crate::error::{Error, Result};

/// A multi-agent decision maker that can be driven by [`run_episode`].
///
/// Implementations are registered by name in the harness.
pub trait Scheduler: Send {
    fn name(&self) -> &str;

    /// Called after the environment has been reset.
    fn begin_episode(&mut self, _episode: usize, _episodes: usize, _env: &dyn Environment) -> Result<()> {
        Ok(())
    }

    /// Joint action for the current state. `explore` is false during evaluation.
    fn act(&mut self, env: &dyn Environment, explore: bool) -> Result<Vec<Action>>;

    /// Sees one transition; learns from it when `learn` is set.
    fn record(&mut self, env: &dyn Environment, exp: &Experience, learn: bool) -> Result<()>;

    /// Asks the runner to cut the current episode short.
    fn should_stop(&self) -> bool {
        false
    }

    fn end_episode(&mut self, _summary: &EpisodeSummary, _learn: bool) -> Result<()> {
        Ok(())
    }
}

/// Totals of one episode.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpisodeSummary {
    pub total_reward: f64,
    /// Sum of slot scores, including the slot the episode starts in.
    pub mos_total: f64,
    /// Average score per vehicle and slot; 0 without vehicles.
    pub mean_mos: f64,
    /// Number of serving UAVs averaged over the scored slots.
    pub offloading_uav_count: f64,
    pub steps: usize,
}

/// Resets `env` and plays one episode with `sched`.
pub fn run_episode(
    env: &mut dyn Environment,
    sched: &mut dyn Scheduler,
    episode: usize,
    episodes: usize,
    learn: bool,
) -> Result<EpisodeSummary> {
    env.reset()?;
    sched.begin_episode(episode, episodes, env)?;
    let n = env.num_agents();
    let first = env.info();
    let mut mos_total = first.mos_total;
    let mut scored = first.vehicles;
    let mut offloading = first.offloading_uavs as f64;
    let mut slots = 1usize;
    let mut total_reward = 0.0;
    let mut steps = 0usize;
    loop {
        let actions = sched.act(env, learn)?;
        if actions.len() != n {
            return Err(Error::invalid(format!(
                "{} returned {} actions for {n} agents",
                sched.name(),
                actions.len()
            )));
        }
        let state = env.state().clone();
        let out = env.step(&actions)?;
        steps += 1;
        total_reward += out.reward;
        mos_total += out.info.mos_total;
        scored += out.info.vehicles;
        offloading += out.info.offloading_uavs as f64;
        slots += 1;
        let exp = Experience {
            state,
            actions,
            reward: out.reward,
            next_state: out.state,
            done: out.done,
        };
        sched.record(env, &exp, learn)?;
        if out.done || sched.should_stop() {
            break;
        }
    }
    let summary = EpisodeSummary {
        total_reward,
        mos_total,
        mean_mos: if scored > 0 { mos_total / scored as f64 } else { 0.0 },
        offloading_uav_count: offloading / slots as f64,
        steps,
    };
    sched.end_episode(&summary, learn)?;
    Ok(summary)
}
