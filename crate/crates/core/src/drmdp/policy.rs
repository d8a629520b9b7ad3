use std::collections::BTreeMap;

use super::spec::{DrmdpSpec, PROB_TOL};
use super::{ActionId, StateId, Step};
use crate::error::{Error, Result};

/// Stochastic action selection given the running segment.
///
/// `history` is the overlap prefix plus the body of the current interval so far
/// (length `c + phase`), `state` the state being acted in.
pub trait Policy {
    fn action_probs(&self, history: &[Step], state: StateId, phase: usize) -> Option<&[f64]>;
}

/// Policy on `(state, phase)`; the class `Π_s` when the tabulated phase is ignored by the model.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyS {
    num_states: usize,
    num_phases: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl PolicyS {
    /// Uniform over the available actions of every non-absorbing state.
    pub fn uniform(spec: &DrmdpSpec) -> Self {
        Self::from_rows(spec, |s, _| {
            let avail = spec.available(s);
            let mut row = vec![0.0; spec.num_actions()];
            for &a in avail {
                row[a] = 1.0 / avail.len() as f64;
            }
            row
        })
        .expect("uniform rows are valid")
    }

    /// Deterministic policy choosing `choose(s, phase)` in every non-absorbing state.
    pub fn deterministic(spec: &DrmdpSpec, choose: impl Fn(StateId, usize) -> ActionId) -> Result<Self> {
        Self::from_rows(spec, |s, phase| {
            let mut row = vec![0.0; spec.num_actions()];
            row[choose(s, phase)] = 1.0;
            row
        })
    }

    /// Deterministic phase-independent policy that picks `choice[s]`.
    pub fn stationary(spec: &DrmdpSpec, choice: &[ActionId]) -> Result<Self> {
        Self::deterministic(spec, |s, _| choice[s])
    }

    pub fn from_rows(spec: &DrmdpSpec, row: impl Fn(StateId, usize) -> Vec<f64>) -> Result<Self> {
        let num_states = spec.num_states();
        let num_actions = spec.num_actions();
        let num_phases = spec.interval_law().max_len();
        let mut probs = vec![0.0; num_states * num_phases * num_actions];
        for s in 0..num_states {
            if spec.is_absorbing(s) {
                continue;
            }
            for phase in 0..num_phases {
                let r = row(s, phase);
                if r.len() != num_actions {
                    return Err(Error::InvalidPolicy(format!("row for state {s} has {} entries", r.len())));
                }
                let off = (s * num_phases + phase) * num_actions;
                probs[off..off + num_actions].copy_from_slice(&r);
            }
        }
        let out = Self { num_states, num_phases, num_actions, probs };
        out.validate(spec)?;
        Ok(out)
    }

    pub fn validate(&self, spec: &DrmdpSpec) -> Result<()> {
        for s in 0..self.num_states {
            if spec.is_absorbing(s) {
                continue;
            }
            for phase in 0..self.num_phases {
                let row = self.row(s, phase).unwrap();
                let mut total = 0.0;
                for (a, &p) in row.iter().enumerate() {
                    if p < 0.0 || (p > 0.0 && !spec.available(s).contains(&a)) {
                        return Err(Error::InvalidPolicy(format!(
                            "state `{}` phase {phase}: bad mass {p} on action `{}`",
                            spec.state_name(s),
                            spec.action_name(a)
                        )));
                    }
                    total += p;
                }
                if (total - 1.0).abs() > PROB_TOL {
                    return Err(Error::InvalidPolicy(format!(
                        "state `{}` phase {phase}: row sums to {total}",
                        spec.state_name(s)
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn num_phases(&self) -> usize {
        self.num_phases
    }

    pub fn row(&self, s: StateId, phase: usize) -> Option<&[f64]> {
        if s >= self.num_states || phase >= self.num_phases {
            return None;
        }
        let off = (s * self.num_phases + phase) * self.num_actions;
        Some(&self.probs[off..off + self.num_actions])
    }

    pub fn prob(&self, s: StateId, phase: usize, a: ActionId) -> f64 {
        self.row(s, phase).map_or(0.0, |r| r[a])
    }

    /// Most likely action, lowest id on ties.
    pub fn mode(&self, s: StateId, phase: usize) -> Option<ActionId> {
        let row = self.row(s, phase)?;
        let mut best: Option<(ActionId, f64)> = None;
        for (a, &p) in row.iter().enumerate() {
            if p > 0.0 && best.is_none_or(|(_, b)| p > b + PROB_TOL) {
                best = Some((a, p));
            }
        }
        best.map(|(a, _)| a)
    }
}

impl Policy for PolicyS {
    fn action_probs(&self, _history: &[Step], state: StateId, phase: usize) -> Option<&[f64]> {
        self.row(state, phase)
    }
}

/// Policy over `(history, state)`: the class `Π_τ`. Missing rows are an error when queried
/// by the solvers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolicyTau {
    num_actions: usize,
    table: BTreeMap<Vec<Step>, BTreeMap<StateId, Vec<f64>>>,
}

impl PolicyTau {
    pub fn new(spec: &DrmdpSpec) -> Self {
        Self { num_actions: spec.num_actions(), table: BTreeMap::new() }
    }

    pub fn set(&mut self, spec: &DrmdpSpec, history: Vec<Step>, state: StateId, row: Vec<f64>) -> Result<()> {
        if row.len() != self.num_actions {
            return Err(Error::InvalidPolicy(format!("row has {} entries", row.len())));
        }
        let total: f64 = row.iter().sum();
        let bad = row
            .iter()
            .enumerate()
            .any(|(a, &p)| p < 0.0 || (p > 0.0 && !spec.available(state).contains(&a)));
        if bad || (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidPolicy(format!(
                "row for `{}` after `{}` is not a distribution over available actions",
                spec.state_name(state),
                spec.format_segment(&history)
            )));
        }
        self.table.entry(history).or_default().insert(state, row);
        Ok(())
    }

    pub fn set_action(&mut self, spec: &DrmdpSpec, history: Vec<Step>, state: StateId, a: ActionId) -> Result<()> {
        let mut row = vec![0.0; self.num_actions];
        row[a] = 1.0;
        self.set(spec, history, state, row)
    }

    pub fn len(&self) -> usize {
        self.table.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// `(history, state, row)` in history order.
    pub fn iter(&self) -> impl Iterator<Item = (&[Step], StateId, &[f64])> {
        self.table
            .iter()
            .flat_map(|(h, rows)| rows.iter().map(move |(&s, r)| (h.as_slice(), s, r.as_slice())))
    }
}

impl Policy for PolicyTau {
    fn action_probs(&self, history: &[Step], state: StateId, _phase: usize) -> Option<&[f64]> {
        self.table.get(history)?.get(&state).map(Vec::as_slice)
    }
}
