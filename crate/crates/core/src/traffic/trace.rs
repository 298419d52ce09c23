//! Trace files: one CSV row per `(slot, vehicle)` with header
//! `t,vehicle_id,x,y,lane_id`, sorted by `(t, vehicle_id)`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::LaneNetwork;
use crate::error::{Error, Result};

pub const TRACE_HEADER: [&str; 5] = ["t", "vehicle_id", "x", "y", "lane_id"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleSample {
    pub vehicle_id: u32,
    pub x: f64,
    pub y: f64,
    pub lane_id: u32,
}

/// All vehicles present in one slot, sorted by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceFrame {
    pub t: u32,
    pub vehicles: Vec<VehicleSample>,
}

impl TraceFrame {
    /// Checks that every vehicle lies on its lane within `tolerance` metres.
    pub fn check_on_lanes(&self, net: &LaneNetwork, tolerance: f64) -> Result<()> {
        for v in &self.vehicles {
            let lane = net.lane(v.lane_id).ok_or_else(|| {
                Error::format("trace", format!("slot {}: unknown lane {}", self.t, v.lane_id))
            })?;
            let d = net.distance_to_lane(lane, v.x, v.y)?;
            if d > tolerance {
                return Err(Error::format(
                    "trace",
                    format!(
                        "slot {}: vehicle {} is {d:.3} m off lane {}",
                        self.t, v.vehicle_id, v.lane_id
                    ),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: u32,
    pub vehicle_id: u32,
    pub x: f64,
    pub y: f64,
    pub lane_id: u32,
}

pub fn rows_from_frames(frames: &[TraceFrame]) -> Vec<TraceRow> {
    frames
        .iter()
        .flat_map(|f| {
            f.vehicles.iter().map(move |v| TraceRow {
                t: f.t,
                vehicle_id: v.vehicle_id,
                x: v.x,
                y: v.y,
                lane_id: v.lane_id,
            })
        })
        .collect()
}

/// Groups sorted rows into one frame per slot from 0 to the last slot; slots without
/// rows become empty frames.
pub fn frames_from_rows(rows: &[TraceRow]) -> Result<Vec<TraceFrame>> {
    for pair in rows.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if (a.t, a.vehicle_id) >= (b.t, b.vehicle_id) {
            return Err(Error::format(
                "trace",
                format!(
                    "rows not strictly sorted by (t, vehicle_id) at t={} vehicle={}",
                    b.t, b.vehicle_id
                ),
            ));
        }
    }
    let Some(last) = rows.last() else {
        return Ok(Vec::new());
    };
    let mut frames: Vec<TraceFrame> = (0..=last.t)
        .map(|t| TraceFrame {
            t,
            vehicles: Vec::new(),
        })
        .collect();
    for r in rows {
        if !(r.x.is_finite() && r.y.is_finite()) {
            return Err(Error::format("trace", format!("non-finite position at t={}", r.t)));
        }
        frames[r.t as usize].vehicles.push(VehicleSample {
            vehicle_id: r.vehicle_id,
            x: r.x,
            y: r.y,
            lane_id: r.lane_id,
        });
    }
    Ok(frames)
}

pub fn write_trace_csv<W: Write>(out: W, frames: &[TraceFrame]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for row in rows_from_frames(frames) {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io("<trace writer>", e))?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceFrame>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(Error::format(
            "trace",
            format!("expected header {:?}, got {:?}", TRACE_HEADER.join(","), header),
        ));
    }
    let rows = r
        .deserialize::<TraceRow>()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    frames_from_rows(&rows)
}
