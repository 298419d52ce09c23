//! Command-line front end: trace generation, training, evaluation and sweeps.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uavmec::harness::{evaluate, run_experiment, sweep, ExperimentConfig, Registry};
use uavmec::traffic::{generate_grid_traces, write_trace_csv, GridSpec};
use uavmec::Error;

#[derive(Parser)]
#[command(name = "uavmec", version, about = "UAV edge-computing scheduling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random-turn vehicle traces on a Manhattan grid.
    GenTraces {
        #[arg(long)]
        rows: u32,
        #[arg(long)]
        cols: u32,
        #[arg(long)]
        vehicles: usize,
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the lane network as JSON.
        #[arg(long)]
        network: Option<PathBuf>,
    },
    /// Train one algorithm and write metrics plus a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        algo: Option<String>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Play greedy episodes with a saved checkpoint.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeat training over values of one numeric config field.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted field path, e.g. `uavs` or `radio.bandwidth_bs`.
        #[arg(long)]
        vary: String,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_values(raw: &[String]) -> Result<Vec<f64>, Error> {
    raw.iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("sweep value {s:?} is not a number")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), Error> {
    let registry = Registry::default();
    match cli.command {
        Command::GenTraces {
            rows,
            cols,
            vehicles,
            horizon,
            seed,
            out,
            network,
        } => {
            let spec = GridSpec::new(rows, cols);
            let frames = generate_grid_traces(&spec, vehicles, horizon, seed)?;
            let f = File::create(&out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
            write_trace_csv(BufWriter::new(f), &frames)?;
            if let Some(path) = network {
                std::fs::write(&path, spec.network().to_json()?).map_err(|e| Error::Io { path, source: e })?;
            }
            println!("wrote {} frames to {}", frames.len(), out.display());
        }
        Command::Train {
            config,
            algo,
            episodes,
            seed,
            out,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(a) = algo {
                cfg.algo = a;
            }
            if let Some(e) = episodes {
                cfg.episodes = e;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let art = run_experiment(&cfg, &registry, &out)?;
            let last = art.rows.last().map_or(0.0, |r| r.total_reward);
            println!(
                "{}: {} episodes, final reward {last:.3}; metrics {}, checkpoint {}",
                cfg.algo,
                art.rows.len(),
                art.metrics.display(),
                art.checkpoint.display()
            );
        }
        Command::Evaluate {
            checkpoint,
            config,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let rows = evaluate(&cfg, &registry, &checkpoint, &out)?;
            let n = rows.len().max(1) as f64;
            let mean_mos = rows.iter().map(|r| r.mean_mos).sum::<f64>() / n;
            let reward = rows.iter().map(|r| r.total_reward).sum::<f64>() / n;
            println!(
                "{}: {} episodes, mean reward {reward:.3}, mean MOS {mean_mos:.4}",
                cfg.algo,
                rows.len()
            );
        }
        Command::Sweep {
            config,
            vary,
            values,
            repetitions,
            out,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(r) = repetitions {
                cfg.repetitions = r;
            }
            cfg.validate()?;
            let values = parse_values(&values)?;
            let path = sweep(&cfg, &registry, &vary, &values, &out)?;
            println!("swept {vary} over {} values; wrote {}", values.len(), path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
