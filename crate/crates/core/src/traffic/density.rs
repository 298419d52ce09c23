use std::collections::BTreeSet;

use super::{LaneNetwork, TraceFrame};
use crate::error::{Error, Result};

/// Vehicles per metre on the block formed by `intersection` and its incident lanes.
///
/// A lane joins two blocks, so one vehicle may count toward two densities.
pub fn block_density(frame: &TraceFrame, net: &LaneNetwork, intersection: u32) -> Result<f64> {
    if net.intersection(intersection).is_none() {
        return Err(Error::invalid(format!("unknown intersection {intersection}")));
    }
    let lanes: BTreeSet<u32> = net.incident_lanes(intersection).map(|l| l.id).collect();
    if lanes.is_empty() {
        return Err(Error::invalid(format!(
            "intersection {intersection} has no incident lanes"
        )));
    }
    let length: f64 = net.incident_lanes(intersection).map(|l| l.length).sum();
    let count = frame
        .vehicles
        .iter()
        .filter(|v| lanes.contains(&v.lane_id))
        .count();
    Ok(count as f64 / length)
}

/// Intersections whose block density strictly exceeds `threshold`, sorted by id.
/// Isolated intersections are skipped.
pub fn detect_shortage(frame: &TraceFrame, net: &LaneNetwork, threshold: f64) -> Result<Vec<u32>> {
    if !(threshold > 0.0) {
        return Err(Error::invalid("shortage threshold must be positive"));
    }
    let mut hits = Vec::new();
    for i in &net.intersections {
        if net.incident_lanes(i.id).next().is_none() {
            continue;
        }
        if block_density(frame, net, i.id)? > threshold {
            hits.push(i.id);
        }
    }
    hits.sort_unstable();
    Ok(hits)
}
