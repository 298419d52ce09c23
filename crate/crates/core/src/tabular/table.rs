use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, Cell, NUM_ACTIONS};
use crate::error::{Error, Result};

/// Q-table state: the lattice coordinates of the UAVs the agent conditions on.
///
/// Text form is `x-y-z` per UAV joined by `|`, e.g. `3-0-1|2-2-0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey(pub Vec<Cell>);

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            write!(f, "{}-{}-{}", c.x, c.y, c.z)?;
        }
        Ok(())
    }
}

impl FromStr for StateKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::format("state key", format!("malformed key {s:?}"));
        s.split('|')
            .map(|part| {
                let v: Vec<u16> = part
                    .split('-')
                    .map(|n| n.parse().map_err(|_| bad()))
                    .collect::<Result<_>>()?;
                match v[..] {
                    [x, y, z] => Ok(Cell::new(x, y, z)),
                    _ => Err(bad()),
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(StateKey)
    }
}

/// Sparse action-value table. Unseen entries read as 0.
///
/// Actions are stored as integer codes; for a plain learner the code is the action
/// index, an opponent-modelling learner uses [`joint_code`].
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    entries: BTreeMap<StateKey, BTreeMap<u64, f64>>,
    pub learning_rate: f64,
    pub discount: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvEntry {
    state_key: String,
    action: u64,
    value: f64,
}

impl QTable {
    pub fn new(learning_rate: f64, discount: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate <= 1.0) {
            return Err(Error::config(format!(
                "learning rate must lie in (0, 1], got {learning_rate}"
            )));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::config(format!("discount must lie in [0, 1), got {discount}")));
        }
        Ok(Self {
            entries: BTreeMap::new(),
            learning_rate,
            discount,
        })
    }

    pub fn get(&self, s: &StateKey, code: u64) -> f64 {
        self.entries
            .get(s)
            .and_then(|row| row.get(&code))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn set(&mut self, s: &StateKey, code: u64, value: f64) {
        self.entries.entry(s.clone()).or_default().insert(code, value);
    }

    /// Stored entries of state `s`, ordered by action code.
    pub fn row(&self, s: &StateKey) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.entries
            .get(s)
            .into_iter()
            .flat_map(|r| r.iter().map(|(&k, &v)| (k, v)))
    }

    /// `Q(s, a)` for the nine plain action codes.
    pub fn values(&self, s: &StateKey) -> [f64; NUM_ACTIONS] {
        let mut out = [0.0; NUM_ACTIONS];
        for (code, v) in self.row(s) {
            if let Some(slot) = out.get_mut(code as usize) {
                *slot = v;
            }
        }
        out
    }

    pub fn max_value(&self, s: &StateKey) -> f64 {
        max_of(&self.values(s))
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (&StateKey, u64, f64)> + '_ {
        self.entries
            .iter()
            .flat_map(|(s, row)| row.iter().map(move |(&a, &v)| (s, a, v)))
    }

    /// Writes `state_key,action,value` rows in key order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        for (s, action, value) in self.iter() {
            w.serialize(CsvEntry {
                state_key: s.to_string(),
                action,
                value,
            })?;
        }
        if self.is_empty() {
            w.write_record(["state_key", "action", "value"])?;
        }
        w.flush().map_err(|e| Error::io("<q-table writer>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, learning_rate: f64, discount: f64) -> Result<Self> {
        let mut t = Self::new(learning_rate, discount)?;
        let mut r = csv::Reader::from_reader(input);
        for row in r.deserialize::<CsvEntry>() {
            let row = row?;
            t.set(&row.state_key.parse()?, row.action, row.value);
        }
        Ok(t)
    }
}

pub(crate) fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Applies `Q ← (1−α)Q + α[r + β·next_max]` to entry `(s, code)` and returns the new value.
pub fn q_update_with(table: &mut QTable, s: &StateKey, code: u64, reward: f64, next_max: f64) -> f64 {
    let (lr, discount) = (table.learning_rate, table.discount);
    let q = table.get(s, code);
    let updated = (1.0 - lr) * q + lr * (reward + discount * next_max);
    table.set(s, code, updated);
    updated
}

/// Plain one-step Q-learning update bootstrapping from `max_a Q(s_next, a)`.
pub fn q_update(table: &mut QTable, s: &StateKey, a: Action, reward: f64, s_next: &StateKey) -> f64 {
    let next_max = table.max_value(s_next);
    q_update_with(table, s, a.index() as u64, reward, next_max)
}

/// With probability `epsilon` a uniform action, otherwise the first maximiser of `values`.
pub fn epsilon_greedy(values: &[f64; NUM_ACTIONS], epsilon: f64, rng: &mut impl Rng) -> Action {
    let index = if rng.gen::<f64>() < epsilon {
        rng.gen_range(0..NUM_ACTIONS)
    } else {
        let mut best = 0;
        for (i, &v) in values.iter().enumerate() {
            if v > values[best] {
                best = i;
            }
        }
        best
    };
    Action::new(index).expect("index below NUM_ACTIONS")
}

pub fn select_action(table: &QTable, s: &StateKey, epsilon: f64, rng: &mut impl Rng) -> Action {
    epsilon_greedy(&table.values(s), epsilon, rng)
}

/// Linear exploration decay from `start` to `end` over the first `decay_fraction` of
/// the episodes, constant afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_fraction: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.05,
            decay_fraction: 0.6,
        }
    }
}

impl EpsilonSchedule {
    pub fn validate(&self) -> Result<()> {
        let unit = 0.0..=1.0;
        if !(unit.contains(&self.start) && unit.contains(&self.end) && unit.contains(&self.decay_fraction)) {
            return Err(Error::config("epsilon schedule values must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn value(&self, episode: usize, episodes: usize) -> f64 {
        let span = self.decay_fraction * episodes as f64;
        let progress = if span > 0.0 {
            (episode as f64 / span).min(1.0)
        } else {
            1.0
        };
        self.start * (1.0 - progress) + self.end * progress
    }
}
