use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{QTable, StateKey};
use crate::env::{Action, NUM_ACTIONS};
use crate::error::{Error, Result};

/// Encodes the other agents' actions as a base-9 number, first opponent least significant.
pub fn opponent_code(actions: &[Action]) -> u64 {
    actions
        .iter()
        .rev()
        .fold(0u64, |acc, a| acc * NUM_ACTIONS as u64 + a.index() as u64)
}

/// Table code of an own action combined with the opponents' joint action.
pub fn joint_code(own: Action, opponents: &[Action]) -> u64 {
    own.index() as u64 + NUM_ACTIONS as u64 * opponent_code(opponents)
}

/// Per-state counts of every other agent's observed actions.
#[derive(Debug, Clone, PartialEq)]
pub struct OpponentModel {
    opponents: usize,
    counts: BTreeMap<StateKey, Vec<[u64; NUM_ACTIONS]>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvCount {
    state_key: String,
    opponent: usize,
    action: usize,
    count: u64,
}

impl OpponentModel {
    pub fn new(opponents: usize) -> Self {
        Self {
            opponents,
            counts: BTreeMap::new(),
        }
    }

    pub fn opponents(&self) -> usize {
        self.opponents
    }

    /// Records the other agents' actions taken in `s`.
    pub fn observe(&mut self, s: &StateKey, actions: &[Action]) -> Result<()> {
        if actions.len() != self.opponents {
            return Err(Error::invalid(format!(
                "expected {} opponent actions, got {}",
                self.opponents,
                actions.len()
            )));
        }
        let row = self
            .counts
            .entry(s.clone())
            .or_insert_with(|| vec![[0; NUM_ACTIONS]; self.opponents]);
        for (j, a) in actions.iter().enumerate() {
            row[j][a.index()] += 1;
        }
        Ok(())
    }

    pub fn count(&self, s: &StateKey, opponent: usize, action: Action) -> u64 {
        self.counts
            .get(s)
            .map_or(0, |row| row[opponent][action.index()])
    }

    /// Empirical action distribution of `opponent` in `s`; uniform before any observation.
    pub fn frequencies(&self, s: &StateKey, opponent: usize) -> [f64; NUM_ACTIONS] {
        let uniform = [1.0 / NUM_ACTIONS as f64; NUM_ACTIONS];
        let Some(row) = self.counts.get(s) else {
            return uniform;
        };
        let c = &row[opponent];
        let total: u64 = c.iter().sum();
        if total == 0 {
            return uniform;
        }
        c.map(|n| n as f64 / total as f64)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut any = false;
        for (s, row) in &self.counts {
            for (opponent, counts) in row.iter().enumerate() {
                for (action, &count) in counts.iter().enumerate() {
                    if count > 0 {
                        any = true;
                        w.serialize(CsvCount {
                            state_key: s.to_string(),
                            opponent,
                            action,
                            count,
                        })?;
                    }
                }
            }
        }
        if !any {
            w.write_record(["state_key", "opponent", "action", "count"])?;
        }
        w.flush().map_err(|e| Error::io("<opponent writer>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, opponents: usize) -> Result<Self> {
        let mut m = Self::new(opponents);
        let mut r = csv::Reader::from_reader(input);
        for row in r.deserialize::<CsvCount>() {
            let row = row?;
            if row.opponent >= opponents || row.action >= NUM_ACTIONS {
                return Err(Error::format("opponent counts", "index out of range"));
            }
            let s: StateKey = row.state_key.parse()?;
            m.counts
                .entry(s)
                .or_insert_with(|| vec![[0; NUM_ACTIONS]; opponents])[row.opponent][row.action] =
                row.count;
        }
        Ok(m)
    }
}

/// Expected `Q(s, a, ·)` for each own action `a` under the empirical joint distribution
/// of the other agents' actions (product of their per-state frequencies).
pub fn opponent_weighted_value(table: &QTable, model: &OpponentModel, s: &StateKey) -> [f64; NUM_ACTIONS] {
    if model.opponents() == 0 {
        return table.values(s);
    }
    let freqs: Vec<[f64; NUM_ACTIONS]> = (0..model.opponents()).map(|j| model.frequencies(s, j)).collect();
    let mut out = [0.0; NUM_ACTIONS];
    // Unseen entries are zero, so only stored ones contribute.
    for (code, q) in table.row(s) {
        let own = (code % NUM_ACTIONS as u64) as usize;
        let mut rest = code / NUM_ACTIONS as u64;
        let mut p = 1.0;
        for f in &freqs {
            p *= f[(rest % NUM_ACTIONS as u64) as usize];
            rest /= NUM_ACTIONS as u64;
        }
        out[own] += p * q;
    }
    out
}
