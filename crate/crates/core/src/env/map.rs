use std::path::Path;

use crate::error::{Error, Result};

/// Planar occupancy grid. Text form: one row per line, `.` free and `#` obstacle;
/// the first line is row `y = 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyMap {
    pub width: usize,
    pub height: usize,
    obstacles: Vec<bool>,
}

impl OccupancyMap {
    pub fn open(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            obstacles: vec![false; width * height],
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
        let width = rows.first().map_or(0, |r| r.chars().count());
        if width == 0 {
            return Err(Error::format("occupancy map", "map is empty"));
        }
        let mut obstacles = Vec::with_capacity(width * rows.len());
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(Error::format(
                    "occupancy map",
                    format!("row {y} has {} cells, expected {width}", row.chars().count()),
                ));
            }
            for ch in row.chars() {
                match ch {
                    '.' => obstacles.push(false),
                    '#' => obstacles.push(true),
                    other => {
                        return Err(Error::format(
                            "occupancy map",
                            format!("unexpected character {other:?} in row {y}"),
                        ))
                    }
                }
            }
        }
        Ok(Self {
            width,
            height: rows.len(),
            obstacles,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn render(&self) -> String {
        let mut s = String::with_capacity((self.width + 1) * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                s.push(if self.is_obstacle(x, y) { '#' } else { '.' });
            }
            s.push('\n');
        }
        s
    }

    pub fn len(&self) -> usize {
        self.obstacles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obstacles.is_empty()
    }

    pub fn is_obstacle(&self, x: usize, y: usize) -> bool {
        self.obstacles[y * self.width + x]
    }

    pub fn set_obstacle(&mut self, x: usize, y: usize, blocked: bool) {
        self.obstacles[y * self.width + x] = blocked;
    }

    pub fn free_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.height)
            .flat_map(move |y| (0..self.width).map(move |x| (x, y)))
            .filter(|&(x, y)| !self.is_obstacle(x, y))
    }

    pub fn mask(&self) -> Vec<f64> {
        self.obstacles.iter().map(|&b| f64::from(u8::from(b))).collect()
    }
}
