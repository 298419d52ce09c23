//! Synthetic Manhattan-grid traffic: vehicles take random turns at every
//! intersection and never leave the map.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Intersection, Lane, LaneNetwork, TraceFrame, VehicleSample, SLOT_SECONDS};
use crate::error::{Error, Result};

/// 60 km/h in m/s.
pub const SPEED_LIMIT_60_KMH: f64 = 60.0 / 3.6;

/// Minimum spacing between vehicles at placement time, metres.
const HEADWAY: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub rows: u32,
    pub cols: u32,
    /// Distance between neighbouring intersections, metres.
    pub block_length: f64,
    pub speed_limit: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            rows: 10,
            cols: 10,
            block_length: 100.0,
            speed_limit: SPEED_LIMIT_60_KMH,
        }
    }
}

impl GridSpec {
    pub fn new(rows: u32, cols: u32) -> Self {
        Self {
            rows,
            cols,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.rows < 2 || self.cols < 2 {
            return Err(Error::config("grid needs at least 2 rows and 2 columns"));
        }
        if !(self.block_length > 0.0 && self.speed_limit > 0.0) {
            return Err(Error::config("grid block_length and speed_limit must be positive"));
        }
        Ok(())
    }

    /// Intersection `r * cols + c` sits at `(c, r) * block_length`. Horizontal lanes come
    /// first, row by row, then vertical lanes.
    pub fn network(&self) -> LaneNetwork {
        let (rows, cols, len) = (self.rows, self.cols, self.block_length);
        let intersections = (0..rows)
            .flat_map(|r| {
                (0..cols).map(move |c| Intersection {
                    id: r * cols + c,
                    x: c as f64 * len,
                    y: r as f64 * len,
                })
            })
            .collect();
        let mut lanes = Vec::new();
        let mut lane = |from, to| {
            let id = lanes.len() as u32;
            lanes.push(Lane {
                id,
                from,
                to,
                length: len,
                speed_limit: self.speed_limit,
            });
        };
        for r in 0..rows {
            for c in 0..cols - 1 {
                lane(r * cols + c, r * cols + c + 1);
            }
        }
        for r in 0..rows - 1 {
            for c in 0..cols {
                lane(r * cols + c, (r + 1) * cols + c);
            }
        }
        LaneNetwork {
            intersections,
            lanes,
        }
    }
}

struct Walker {
    lane: usize,
    /// Travelling from `lane.from` to `lane.to`.
    forward: bool,
    /// Distance already covered along the lane in the travel direction.
    offset: f64,
    speed: f64,
}

/// Random-turn vehicle traces on a `rows × cols` grid: `horizon + 1` frames, one per slot.
pub fn generate_grid_traces(
    spec: &GridSpec,
    num_vehicles: usize,
    horizon: usize,
    seed: u64,
) -> Result<Vec<TraceFrame>> {
    spec.validate()?;
    if num_vehicles == 0 {
        return Err(Error::config("at least one vehicle is required"));
    }
    let net = spec.network();
    let slots_per_lane = (spec.block_length / HEADWAY).floor() as usize;
    let capacity = slots_per_lane * net.lanes.len();
    if num_vehicles > capacity {
        return Err(Error::config(format!(
            "{num_vehicles} vehicles exceed lane capacity {capacity} at {HEADWAY} m headway"
        )));
    }

    let adjacency: Vec<Vec<usize>> = net
        .intersections
        .iter()
        .map(|i| {
            net.lanes
                .iter()
                .enumerate()
                .filter(|(_, l)| l.from == i.id || l.to == i.id)
                .map(|(k, _)| k)
                .collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut walkers: Vec<Walker> = index::sample(&mut rng, capacity, num_vehicles)
        .into_iter()
        .map(|slot| {
            let lane = slot / slots_per_lane;
            let pos = ((slot % slots_per_lane) as f64 + 0.5) * HEADWAY;
            let forward = rng.gen_bool(0.5);
            let offset = if forward { pos } else { spec.block_length - pos };
            Walker {
                lane,
                forward,
                offset,
                speed: spec.speed_limit * rng.gen_range(0.5..=1.0),
            }
        })
        .collect();

    let sample = |walkers: &[Walker], t: usize| -> TraceFrame {
        let vehicles = walkers
            .iter()
            .enumerate()
            .map(|(id, w)| {
                let l = &net.lanes[w.lane];
                let a = &net.intersections[l.from as usize];
                let b = &net.intersections[l.to as usize];
                let s = if w.forward {
                    w.offset / l.length
                } else {
                    1.0 - w.offset / l.length
                };
                VehicleSample {
                    vehicle_id: id as u32,
                    x: a.x + s * (b.x - a.x),
                    y: a.y + s * (b.y - a.y),
                    lane_id: l.id,
                }
            })
            .collect();
        TraceFrame {
            t: t as u32,
            vehicles,
        }
    };

    let mut frames = Vec::with_capacity(horizon + 1);
    frames.push(sample(&walkers, 0));
    for t in 1..=horizon {
        for w in &mut walkers {
            let mut remaining = w.speed * SLOT_SECONDS;
            loop {
                let len = net.lanes[w.lane].length;
                if w.offset + remaining < len {
                    w.offset += remaining;
                    break;
                }
                remaining -= len - w.offset;
                let lane = &net.lanes[w.lane];
                let at = if w.forward { lane.to } else { lane.from };
                let options: Vec<usize> = adjacency[at as usize]
                    .iter()
                    .copied()
                    .filter(|&k| k != w.lane)
                    .collect();
                let next = *options.choose(&mut rng).unwrap_or(&w.lane);
                w.lane = next;
                w.forward = net.lanes[next].from == at;
                w.offset = 0.0;
            }
        }
        frames.push(sample(&walkers, t));
    }
    Ok(frames)
}
