//! Mean-opinion-score model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MOS_MIN: f64 = 1.0;
pub const MOS_MAX: f64 = 5.0;

/// Convex weights of the delay and rate components of a score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MosWeights {
    pub w_delay: f64,
    pub w_rate: f64,
}

impl Default for MosWeights {
    fn default() -> Self {
        Self {
            w_delay: 0.0,
            w_rate: 1.0,
        }
    }
}

impl MosWeights {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |w: f64| (0.0..=1.0).contains(&w);
        if !(in_unit(self.w_delay) && in_unit(self.w_rate)) {
            return Err(Error::config("mos weights must lie in [0, 1]"));
        }
        if (self.w_delay + self.w_rate - 1.0).abs() > 1e-12 {
            return Err(Error::config("mos weights must sum to 1"));
        }
        Ok(())
    }
}

/// Log-linear map from link rate to a rate score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MosRateMap {
    /// Rates at or below this score 1.
    pub rate_floor: f64,
    /// Rates at or above this score 5.
    pub rate_ceiling: f64,
}

impl Default for MosRateMap {
    fn default() -> Self {
        Self {
            rate_floor: 1e5,
            rate_ceiling: 1e8,
        }
    }
}

impl MosRateMap {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate_floor > 0.0 && self.rate_ceiling > self.rate_floor) {
            return Err(Error::config(
                "mos rate map requires 0 < rate_floor < rate_ceiling",
            ));
        }
        Ok(())
    }
}

/// `1 + 4 · clamp(ln(rate/floor) / ln(ceiling/floor), 0, 1)`.
pub fn mos_from_rate(rate: f64, map: &MosRateMap) -> f64 {
    if !(rate > map.rate_floor) {
        return MOS_MIN;
    }
    let frac = (rate / map.rate_floor).ln() / (map.rate_ceiling / map.rate_floor).ln();
    MOS_MIN + (MOS_MAX - MOS_MIN) * frac.clamp(0.0, 1.0)
}

/// Weighted combination of the delay and rate scores of one vehicle in one slot.
pub fn mos_instant(mos_rate: f64, mos_delay: f64, w: &MosWeights) -> Result<f64> {
    for s in [mos_rate, mos_delay] {
        if !(MOS_MIN..=MOS_MAX).contains(&s) {
            return Err(Error::invalid(format!("score {s} outside [1, 5]")));
        }
    }
    Ok(w.w_delay * mos_delay + w.w_rate * mos_rate)
}

/// Sum of scores over every slot and vehicle. `scores[t][m]` is vehicle `m` at slot `t`;
/// the matrix must have `horizon + 1` rows of equal length.
pub fn mos_episode_total(scores: &[Vec<f64>], horizon: usize) -> Result<f64> {
    if scores.len() != horizon + 1 {
        return Err(Error::invalid(format!(
            "expected {} slots, got {}",
            horizon + 1,
            scores.len()
        )));
    }
    let width = scores.first().map_or(0, Vec::len);
    if scores.iter().any(|row| row.len() != width) {
        return Err(Error::invalid("ragged score matrix"));
    }
    Ok(scores.iter().flatten().sum())
}

/// Scoring settings bundled for the environment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QoeConfig {
    pub rate_map: MosRateMap,
    pub weights: MosWeights,
    /// Fixed delay score applied to every served vehicle. When absent the delay term
    /// mirrors the rate score, so any weights reduce to the rate-only model.
    pub delay_score: Option<f64>,
}

impl QoeConfig {
    pub fn validate(&self) -> Result<()> {
        self.rate_map.validate()?;
        self.weights.validate()?;
        if let Some(d) = self.delay_score {
            if !(MOS_MIN..=MOS_MAX).contains(&d) {
                return Err(Error::config("delay_score must lie in [1, 5]"));
            }
        }
        Ok(())
    }

    /// Score of one vehicle given its achieved rate, or `None` for a failed transmission.
    pub fn score(&self, rate: Option<f64>) -> f64 {
        let Some(rate) = rate else {
            return MOS_MIN;
        };
        let r = mos_from_rate(rate, &self.rate_map);
        let d = self.delay_score.unwrap_or(r);
        mos_instant(r, d, &self.weights).unwrap_or(MOS_MIN)
    }
}
