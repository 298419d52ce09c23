use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intersection {
    pub id: u32,
    pub x: f64,
    pub y: f64,
}

/// An undirected road segment between two intersections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub id: u32,
    pub from: u32,
    pub to: u32,
    pub length: f64,
    pub speed_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LaneNetwork {
    pub intersections: Vec<Intersection>,
    pub lanes: Vec<Lane>,
}

impl LaneNetwork {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let net: LaneNetwork = serde_json::from_str(&text)?;
        net.validate()?;
        Ok(net)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeMap::new();
        for i in &self.intersections {
            if seen.insert(i.id, i).is_some() {
                return Err(Error::format("lane network", format!("duplicate intersection {}", i.id)));
            }
        }
        let mut lane_ids = BTreeMap::new();
        for l in &self.lanes {
            if lane_ids.insert(l.id, ()).is_some() {
                return Err(Error::format("lane network", format!("duplicate lane {}", l.id)));
            }
            if !seen.contains_key(&l.from) || !seen.contains_key(&l.to) {
                return Err(Error::format(
                    "lane network",
                    format!("lane {} references a missing intersection", l.id),
                ));
            }
            if !(l.length > 0.0 && l.speed_limit > 0.0) {
                return Err(Error::format(
                    "lane network",
                    format!("lane {} needs positive length and speed limit", l.id),
                ));
            }
        }
        Ok(())
    }

    pub fn intersection(&self, id: u32) -> Option<&Intersection> {
        self.intersections.iter().find(|i| i.id == id)
    }

    pub fn lane(&self, id: u32) -> Option<&Lane> {
        self.lanes.iter().find(|l| l.id == id)
    }

    /// Lanes with one endpoint at `intersection`, in network order.
    pub fn incident_lanes(&self, intersection: u32) -> impl Iterator<Item = &Lane> {
        self.lanes
            .iter()
            .filter(move |l| l.from == intersection || l.to == intersection)
    }

    pub fn endpoints(&self, lane: &Lane) -> Result<((f64, f64), (f64, f64))> {
        let a = self
            .intersection(lane.from)
            .ok_or_else(|| Error::invalid(format!("missing intersection {}", lane.from)))?;
        let b = self
            .intersection(lane.to)
            .ok_or_else(|| Error::invalid(format!("missing intersection {}", lane.to)))?;
        Ok(((a.x, a.y), (b.x, b.y)))
    }

    /// Axis-aligned bounding box of all intersections as `(min_x, min_y, max_x, max_y)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.intersections.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), i| (a.min(i.x), b.min(i.y), c.max(i.x), d.max(i.y)),
        )
    }

    /// Distance from a point to the segment of `lane`.
    pub fn distance_to_lane(&self, lane: &Lane, x: f64, y: f64) -> Result<f64> {
        let ((ax, ay), (bx, by)) = self.endpoints(lane)?;
        let (vx, vy) = (bx - ax, by - ay);
        let len2 = vx * vx + vy * vy;
        let s = if len2 == 0.0 {
            0.0
        } else {
            (((x - ax) * vx + (y - ay) * vy) / len2).clamp(0.0, 1.0)
        };
        Ok((x - (ax + s * vx)).hypot(y - (ay + s * vy)))
    }
}
