use crate::error::{Error, Result};

/// Channels of every observation: field value, obstacle mask, other agents, self.
pub const OBS_CHANNELS: usize = 4;

/// A scalar field over a planar grid, row-major with `y` as the row.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl FieldGrid {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// What one agent sees: a zero-padded `window × window` crop centred on itself and a
/// mean-pooled low-resolution map of the whole grid, both with [`OBS_CHANNELS`]
/// channels in channel-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub window: usize,
    pub local: Vec<f64>,
    pub global_height: usize,
    pub global_width: usize,
    pub global: Vec<f64>,
}

/// Builds the observation of `agent` from a field, an obstacle mask and the planar
/// positions of all agents.
pub fn observe(
    field: &FieldGrid,
    obstacles: &[f64],
    positions: &[(usize, usize)],
    agent: usize,
    window: usize,
    coarse_factor: usize,
) -> Result<Observation> {
    if agent >= positions.len() {
        return Err(Error::invalid(format!(
            "agent {agent} out of range for {} agents",
            positions.len()
        )));
    }
    if window % 2 == 0 {
        return Err(Error::invalid("observation window must be odd"));
    }
    if coarse_factor == 0 {
        return Err(Error::invalid("coarse factor must be at least 1"));
    }
    let (w, h) = (field.width, field.height);
    debug_assert_eq!(obstacles.len(), w * h);

    let mut others = vec![0.0; w * h];
    for (i, &(x, y)) in positions.iter().enumerate() {
        if i != agent {
            others[y * w + x] += 1.0;
        }
    }
    let (ax, ay) = positions[agent];
    let mut me = vec![0.0; w * h];
    me[ay * w + ax] = 1.0;
    let planes: [&[f64]; OBS_CHANNELS] = [&field.values, obstacles, &others, &me];

    let r = (window / 2) as isize;
    let mut local = vec![0.0; OBS_CHANNELS * window * window];
    for (c, plane) in planes.iter().enumerate() {
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (ax as isize + dx, ay as isize + dy);
                if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
                    continue;
                }
                let row = (dy + r) as usize;
                let col = (dx + r) as usize;
                local[(c * window + row) * window + col] = plane[y as usize * w + x as usize];
            }
        }
    }

    let f = coarse_factor;
    let (gh, gw) = (h.div_ceil(f), w.div_ceil(f));
    let norm = (f * f) as f64;
    let mut global = vec![0.0; OBS_CHANNELS * gh * gw];
    for (c, plane) in planes.iter().enumerate() {
        for y in 0..h {
            for x in 0..w {
                global[(c * gh + y / f) * gw + x / f] += plane[y * w + x];
            }
        }
    }
    for v in &mut global {
        *v /= norm;
    }

    Ok(Observation {
        window,
        local,
        global_height: gh,
        global_width: gw,
        global,
    })
}
