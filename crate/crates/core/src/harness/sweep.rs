use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::Value;

use super::{train, write_sweep, ExperimentConfig, Registry, SweepRow};
use crate::error::{Error, Result};

pub const SWEEP_FILE: &str = "sweep.csv";

/// 64-bit FNV-1a.
fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    bytes.into_iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Seed of one sweep run: the base seed XOR a stable hash of the algorithm, the
/// swept value and the repetition index.
pub fn sub_seed(seed: u64, algo: &str, value: f64, repetition: usize) -> u64 {
    let bytes = algo
        .bytes()
        .chain([0xff])
        .chain(value.to_bits().to_le_bytes())
        .chain((repetition as u64).to_le_bytes());
    seed ^ fnv1a(bytes)
}

/// Copy of `cfg` with the numeric field at dotted `path` (e.g. `uavs` or
/// `radio.bandwidth_bs`) set to `value`.
pub fn with_param(cfg: &ExperimentConfig, path: &str, value: f64) -> Result<ExperimentConfig> {
    let mut doc = serde_json::to_value(cfg)?;
    let mut slot = &mut doc;
    for key in path.split('.') {
        slot = slot
            .get_mut(key)
            .ok_or_else(|| Error::config(format!("unknown parameter {path:?}")))?;
    }
    let Value::Number(old) = slot else {
        return Err(Error::config(format!("parameter {path:?} is not numeric")));
    };
    *slot = if old.is_f64() {
        serde_json::Number::from_f64(value)
            .map(Value::Number)
            .ok_or_else(|| Error::config(format!("{value} is not a finite number")))?
    } else if value.fract() == 0.0 && value >= 0.0 && value <= u64::MAX as f64 {
        Value::from(value as u64)
    } else {
        return Err(Error::config(format!("parameter {path:?} needs a non-negative integer, got {value}")));
    };
    let mut out: ExperimentConfig = serde_json::from_value(doc)?;
    out.base_dir = cfg.base_dir.clone();
    out.validate()?;
    Ok(out)
}

/// Runs `cfg` once per value and repetition and returns all rows, ordered by value
/// position then repetition. Runs execute in parallel.
pub fn sweep_rows(
    cfg: &ExperimentConfig,
    registry: &Registry,
    param: &str,
    values: &[f64],
) -> Result<Vec<SweepRow>> {
    let jobs: Vec<(usize, usize, ExperimentConfig)> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let base = with_param(cfg, param, v)?;
            Ok((0..cfg.repetitions).map(move |rep| {
                let seed = sub_seed(cfg.seed, &cfg.algo, v, rep);
                (i, rep, ExperimentConfig { seed, ..base.clone() })
            }))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    registry.get(&cfg.algo)?;
    let mut done: Vec<(usize, usize, Vec<SweepRow>)> = jobs
        .into_par_iter()
        .map(|(i, rep, run)| {
            let rows = train(&run, registry)?.rows;
            let tagged = rows
                .into_iter()
                .map(|row| SweepRow {
                    sweep_value: values[i],
                    row,
                })
                .collect();
            Ok((i, rep, tagged))
        })
        .collect::<Result<_>>()?;
    done.sort_by_key(|&(i, rep, _)| (i, rep));
    Ok(done.into_iter().flat_map(|(_, _, rows)| rows).collect())
}

/// [`sweep_rows`], written to `out/sweep.csv`.
pub fn sweep(
    cfg: &ExperimentConfig,
    registry: &Registry,
    param: &str,
    values: &[f64],
    out: &Path,
) -> Result<PathBuf> {
    let rows = sweep_rows(cfg, registry, param, values)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join(SWEEP_FILE);
    let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_sweep(BufWriter::new(f), &rows)?;
    Ok(path)
}
