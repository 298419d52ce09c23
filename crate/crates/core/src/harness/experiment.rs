use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::{write_metrics, Agent, ExperimentConfig, MetricsRow, Registry};
use crate::env::{run_episode, Environment};
use crate::error::{Error, Result};

pub const METRICS_FILE: &str = "metrics.csv";

/// Rows of a finished run together with the trained agent.
pub struct Trained {
    pub rows: Vec<MetricsRow>,
    pub agent: Box<dyn Agent>,
}

fn play(
    cfg: &ExperimentConfig,
    env: &mut dyn Environment,
    agent: &mut dyn Agent,
    episodes: usize,
    learn: bool,
) -> Result<Vec<MetricsRow>> {
    let algo = agent.name().to_string();
    let n = env.num_agents();
    (0..episodes)
        .map(|e| {
            let t = Instant::now();
            let s = run_episode(env, agent, e, episodes, learn)?;
            let ms = if cfg.timing { t.elapsed().as_millis() as u64 } else { 0 };
            let row = MetricsRow::new(e, &algo, cfg.seed, &s, ms);
            row.check(n)?;
            Ok(row)
        })
        .collect()
}

/// Trains `cfg.algo` for `cfg.episodes` episodes without touching the disk.
pub fn train(cfg: &ExperimentConfig, registry: &Registry) -> Result<Trained> {
    cfg.validate()?;
    let strategy = registry.get(&cfg.algo)?;
    let mut env = cfg.environment()?;
    let mut agent = strategy.build(cfg, env.as_ref(), cfg.seed)?;
    let rows = play(cfg, env.as_mut(), agent.as_mut(), cfg.episodes, true)?;
    Ok(Trained { rows, agent })
}

/// Files written by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub metrics: PathBuf,
    pub checkpoint: PathBuf,
    pub rows: Vec<MetricsRow>,
}

fn write_metrics_file(dir: &Path, rows: &[MetricsRow]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(METRICS_FILE);
    let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_metrics(BufWriter::new(f), rows)?;
    Ok(path)
}

/// Trains, then writes `metrics.csv` and the final checkpoint into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, registry: &Registry, out: &Path) -> Result<RunArtifacts> {
    let Trained { rows, agent } = train(cfg, registry)?;
    let metrics = write_metrics_file(out, &rows)?;
    let checkpoint = agent.save(out)?;
    Ok(RunArtifacts {
        metrics,
        checkpoint,
        rows,
    })
}

/// Plays `cfg.eval_episodes` greedy episodes with a restored agent and writes their
/// metrics into `out`. Nothing is learned.
pub fn evaluate(
    cfg: &ExperimentConfig,
    registry: &Registry,
    checkpoint: &Path,
    out: &Path,
) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    let strategy = registry.get(&cfg.algo)?;
    let mut env = cfg.environment()?;
    let mut agent = strategy.restore(cfg, env.as_ref(), checkpoint, cfg.seed)?;
    let rows = play(cfg, env.as_mut(), agent.as_mut(), cfg.eval_episodes, false)?;
    write_metrics_file(out, &rows)?;
    Ok(rows)
}

/// Greedy evaluation of an agent still in memory.
pub fn evaluate_agent(cfg: &ExperimentConfig, agent: &mut dyn Agent) -> Result<Vec<MetricsRow>> {
    let mut env = cfg.environment()?;
    play(cfg, env.as_mut(), agent, cfg.eval_episodes, false)
}
