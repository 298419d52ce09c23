use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::env::EpisodeSummary;
use crate::error::{Error, Result};
use crate::qoe::{MOS_MAX, MOS_MIN};

pub const METRICS_HEADER: &str =
    "episode,algo,seed,total_reward,mos_total,mean_mos,offloading_uav_count,wallclock_ms";

/// One episode of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: usize,
    pub algo: String,
    pub seed: u64,
    pub total_reward: f64,
    pub mos_total: f64,
    pub mean_mos: f64,
    pub offloading_uav_count: f64,
    pub wallclock_ms: u64,
}

impl MetricsRow {
    pub fn new(episode: usize, algo: &str, seed: u64, s: &EpisodeSummary, wallclock_ms: u64) -> Self {
        Self {
            episode,
            algo: algo.to_string(),
            seed,
            total_reward: s.total_reward,
            mos_total: s.mos_total,
            mean_mos: s.mean_mos,
            offloading_uav_count: s.offloading_uav_count,
            wallclock_ms,
        }
    }

    /// Checks the row against a run with `agents` UAVs. A positive `mean_mos` means
    /// vehicles were scored, so it must lie on the opinion scale.
    pub fn check(&self, agents: usize) -> Result<()> {
        let finite = [self.total_reward, self.mos_total, self.mean_mos, self.offloading_uav_count]
            .iter()
            .all(|v| v.is_finite());
        let tol = 1e-9;
        let bad = if !finite {
            Some("non-finite value")
        } else if self.mos_total < 0.0 || self.mean_mos < 0.0 {
            Some("negative score")
        } else if self.mean_mos > 0.0 && !(MOS_MIN - tol..=MOS_MAX + tol).contains(&self.mean_mos) {
            Some("mean_mos off the 1..5 scale")
        } else if !(0.0..=agents as f64 + tol).contains(&self.offloading_uav_count) {
            Some("offloading_uav_count outside [0, N]")
        } else {
            None
        };
        match bad {
            Some(why) => Err(Error::invalid(format!(
                "metrics row {} of {}: {why}",
                self.episode, self.algo
            ))),
            None => Ok(()),
        }
    }
}

/// A metrics row tagged with the swept parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep_value: f64,
    #[serde(flatten)]
    pub row: MetricsRow,
}

fn write_rows<W: Write, T: Serialize>(out: W, header: &str, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<metrics>", e))?;
    Ok(())
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(input: R, header: &str) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    let found = r.headers()?.iter().collect::<Vec<_>>().join(",");
    if found != header {
        return Err(Error::format("metrics csv", format!("unexpected header {found:?}")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_metrics<W: Write>(out: W, rows: &[MetricsRow]) -> Result<()> {
    write_rows(out, METRICS_HEADER, rows)
}

pub fn read_metrics<R: Read>(input: R) -> Result<Vec<MetricsRow>> {
    read_rows(input, METRICS_HEADER)
}

pub fn sweep_header() -> String {
    format!("sweep_value,{METRICS_HEADER}")
}

/// Flattened structs go through serde's map path, which the csv writer cannot take,
/// so sweep rows are written field by field.
pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(sweep_header().split(','))?;
    for s in rows {
        let r = &s.row;
        w.write_record([
            s.sweep_value.to_string(),
            r.episode.to_string(),
            r.algo.clone(),
            r.seed.to_string(),
            r.total_reward.to_string(),
            r.mos_total.to_string(),
            r.mean_mos.to_string(),
            r.offloading_uav_count.to_string(),
            r.wallclock_ms.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<metrics>", e))?;
    Ok(())
}

pub fn read_sweep<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    #[derive(Deserialize)]
    struct Flat {
        sweep_value: f64,
        episode: usize,
        algo: String,
        seed: u64,
        total_reward: f64,
        mos_total: f64,
        mean_mos: f64,
        offloading_uav_count: f64,
        wallclock_ms: u64,
    }
    let flat: Vec<Flat> = read_rows(input, &sweep_header())?;
    Ok(flat
        .into_iter()
        .map(|f| SweepRow {
            sweep_value: f.sweep_value,
            row: MetricsRow {
                episode: f.episode,
                algo: f.algo,
                seed: f.seed,
                total_reward: f.total_reward,
                mos_total: f.mos_total,
                mean_mos: f.mean_mos,
                offloading_uav_count: f.offloading_uav_count,
                wallclock_ms: f.wallclock_ms,
            },
        })
        .collect())
}
