//! Radio geometry and link budget.
//!
//! Everything here is a pure function of its arguments and a [`RadioConfig`].
//! Distances are metres, angles radians, bandwidths Hz and rates bit/s.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical-layer constants shared by the base station and the UAVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    /// Total base-station bandwidth, Hz.
    pub bandwidth_bs: f64,
    /// Bandwidth of each UAV cluster, Hz. Clusters use disjoint spectrum.
    pub bandwidth_uav: f64,
    /// Maximum number of base-station sub-channels.
    pub max_subchannels: u32,
    /// Noise power spectral density, W/Hz.
    pub noise_density: f64,
    /// Transmit power, W.
    pub tx_power: f64,
    /// Base-station channel power factor.
    pub channel_power: f64,
    pub los_b1: f64,
    pub los_b2: f64,
    /// Elevation offset of the LoS power law, degrees.
    pub los_offset: f64,
    pub path_loss_exp: f64,
    pub atten_los: f64,
    pub atten_nlos: f64,
    /// Carrier frequency, Hz.
    pub carrier_freq: f64,
    /// Speed of light, m/s.
    pub light_speed: f64,
    /// Minimum SNR for a successful transmission.
    pub snr_threshold: f64,
    pub bs_height: f64,
    pub uav_height: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            bandwidth_bs: 10e6,
            bandwidth_uav: 10e6,
            max_subchannels: 10,
            noise_density: 1e-12,
            tx_power: 4_000.0,
            channel_power: 40.0,
            los_b1: 0.36,
            los_b2: 0.21,
            los_offset: 0.0,
            path_loss_exp: 2.0,
            atten_los: 1.0,
            atten_nlos: 20.0,
            carrier_freq: 2e9,
            light_speed: 299_792_458.0,
            snr_threshold: 1.0,
            bs_height: 25.0,
            uav_height: 100.0,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bandwidth_bs", self.bandwidth_bs),
            ("bandwidth_uav", self.bandwidth_uav),
            ("noise_density", self.noise_density),
            ("tx_power", self.tx_power),
            ("channel_power", self.channel_power),
            ("los_b1", self.los_b1),
            ("los_b2", self.los_b2),
            ("path_loss_exp", self.path_loss_exp),
            ("carrier_freq", self.carrier_freq),
            ("light_speed", self.light_speed),
            ("bs_height", self.bs_height),
            ("uav_height", self.uav_height),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("radio.{name} must be positive, got {v}")));
            }
        }
        if self.max_subchannels < 1 {
            return Err(Error::config("radio.max_subchannels must be at least 1"));
        }
        if !(self.atten_los >= 1.0 && self.atten_nlos >= self.atten_los) {
            return Err(Error::config(
                "radio attenuation factors must satisfy atten_nlos >= atten_los >= 1",
            ));
        }
        if !(0.0..90.0).contains(&self.los_offset) {
            return Err(Error::config("radio.los_offset must lie in [0, 90)"));
        }
        if !(self.snr_threshold.is_finite() && self.snr_threshold >= 0.0) {
            return Err(Error::config("radio.snr_threshold must be non-negative"));
        }
        Ok(())
    }

    /// `(2π f_c / c)²`, the free-space constant of the gain model.
    pub fn k0(&self) -> f64 {
        let k = 2.0 * PI * self.carrier_freq / self.light_speed;
        k * k
    }

    /// The base station sits at the origin of the coordinate system.
    pub fn bs_position(&self) -> Position {
        Position::new(0.0, 0.0, self.bs_height)
    }
}

/// A point in the world frame. `h` is height above ground; vehicles have `h = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub h: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64, h: f64) -> Self {
        Self { x, y, h }
    }

    pub const fn ground(x: f64, y: f64) -> Self {
        Self { x, y, h: 0.0 }
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.h.is_finite()
    }

    /// Distance in the ground plane, ignoring height.
    pub fn horizontal_distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Straight-line 3-D distance between two points.
pub fn slant_distance(a: &Position, b: &Position) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid("slant_distance: non-finite coordinate"));
    }
    let (dx, dy, dh) = (a.x - b.x, a.y - b.y, a.h - b.h);
    Ok((dx * dx + dy * dy + dh * dh).sqrt())
}

/// Per-vehicle download throughput from the base station when it serves
/// `num_vehicles` vehicles.
///
/// Every vehicle receives a spectral share `W/M`. The noise bandwidth is that same
/// share while `M < X`; once the sub-channel cap is reached (`M >= X`) it stays at
/// `W/X`.
pub fn bs_throughput(num_vehicles: usize, cfg: &RadioConfig) -> Result<f64> {
    let share = cfg.bandwidth_bs / num_vehicles as f64;
    Ok(share * (1.0 + bs_snr(num_vehicles, cfg)?).log2())
}

/// SNR seen by each base-station vehicle when `num_vehicles` share the cell.
pub fn bs_snr(num_vehicles: usize, cfg: &RadioConfig) -> Result<f64> {
    if num_vehicles == 0 {
        return Err(Error::invalid("bs_throughput: vehicle count must be at least 1"));
    }
    let noise_bw = if num_vehicles < cfg.max_subchannels as usize {
        cfg.bandwidth_bs / num_vehicles as f64
    } else {
        cfg.bandwidth_bs / cfg.max_subchannels as f64
    };
    Ok(snr(cfg, noise_bw))
}

/// Elevation angle of the UAV as seen from the vehicle, `asin(Δh / d)`.
pub fn elevation_angle(uav: &Position, vehicle: &Position) -> Result<f64> {
    let d = slant_distance(uav, vehicle)?;
    if d == 0.0 {
        return Err(Error::invalid("elevation_angle: coincident positions"));
    }
    let dh = uav.h - vehicle.h;
    if dh <= 0.0 {
        return Err(Error::invalid("elevation_angle: UAV must be above the vehicle"));
    }
    Ok((dh / d).min(1.0).asin())
}

/// Line-of-sight probability `b1 · (deg(θ) − ζ)^b2`, clamped to `[0, 1]`.
///
/// Angles at or below the offset ζ yield 0 rather than NaN.
pub fn los_probability(theta: f64, cfg: &RadioConfig) -> f64 {
    let base = theta.to_degrees() - cfg.los_offset;
    if !(base > 0.0) {
        return 0.0;
    }
    (cfg.los_b1 * base.powf(cfg.los_b2)).clamp(0.0, 1.0)
}

/// Average channel power gain `K0⁻¹ · d^(−α) · [P_LoS μ_LoS + P_NLoS μ_NLoS]`.
pub fn channel_gain(distance: f64, theta: f64, cfg: &RadioConfig) -> Result<f64> {
    if !(distance.is_finite() && distance > 0.0) {
        return Err(Error::invalid(format!(
            "channel_gain: distance must be positive, got {distance}"
        )));
    }
    let p_los = los_probability(theta, cfg);
    let mix = p_los * cfg.atten_los + (1.0 - p_los) * cfg.atten_nlos;
    Ok(distance.powf(-cfg.path_loss_exp) * mix / cfg.k0())
}

/// Base-station SNR `p_t p_c / (B n0)` for a vehicle with bandwidth `B`.
pub fn snr(cfg: &RadioConfig, per_vehicle_bandwidth: f64) -> f64 {
    cfg.tx_power * cfg.channel_power / (per_vehicle_bandwidth * cfg.noise_density)
}

/// UAV-link SNR: the channel power is the geometric gain of the air-to-ground link.
pub fn uav_snr(cfg: &RadioConfig, gain: f64, per_vehicle_bandwidth: f64) -> f64 {
    cfg.tx_power * gain / (per_vehicle_bandwidth * cfg.noise_density)
}

/// Shannon rate `B log2(1 + snr)`.
pub fn link_rate(bandwidth: f64, snr: f64) -> f64 {
    bandwidth * (1.0 + snr).log2()
}

/// A transmission succeeds iff the received SNR reaches the threshold.
pub fn transmission_ok(snr: f64, cfg: &RadioConfig) -> bool {
    snr >= cfg.snr_threshold
}
