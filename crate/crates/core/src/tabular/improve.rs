use std::collections::HashMap;
use std::sync::Arc;

use super::graph::KeyGraph;
use super::solve::{policy_value, solve_fixed_point, TrajectoryQTable, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
use crate::drmdp::{ActionId, DrmdpSpec, PiReport, PolicyS, StateId, Step};
use crate::error::Result;

/// Values closer than this count as tied; ties go to the lowest action id.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Improvement {
    pub policy: PolicyS,
    /// `(state, phase)` pairs with no reachable key; their row was copied from phase 0
    /// (or set uniform when phase 0 is unreachable too).
    pub unreachable: Vec<(StateId, usize)>,
    /// Present when the PI condition is known to fail; the greedy step is then only a
    /// heuristic for the `(state, phase)` class.
    pub pi_violation: Option<PiReport>,
}

/// Lowest action whose value is within [`TIE_TOL`] of the best.
pub fn argmax_lowest(values: impl IntoIterator<Item = (ActionId, f64)>) -> Option<ActionId> {
    let mut vals: Vec<(ActionId, f64)> = values.into_iter().collect();
    vals.sort_by_key(|&(a, _)| a);
    let mut best: Option<(ActionId, f64)> = None;
    for (a, v) in vals {
        if best.is_none_or(|(_, b)| v > b + TIE_TOL) {
            best = Some((a, v));
        }
    }
    best.map(|(a, _)| a)
}

/// Greedy `Π_s` policy from a trajectory table. For each `(state, phase)` the argmax is
/// taken after the lexicographically smallest reachable history.
pub fn policy_improve(table: &TrajectoryQTable) -> Result<Improvement> {
    let graph = table.graph();
    let spec = graph.spec();
    let mut canonical: HashMap<(StateId, usize), &[Step]> = HashMap::new();
    for (i, key) in graph.keys().iter().enumerate() {
        let node = graph.node(i);
        let hist = &key[..key.len() - 1];
        canonical
            .entry((node.state, node.phase))
            .and_modify(|h| {
                if hist < *h {
                    *h = hist
                }
            })
            .or_insert(hist);
    }
    let mut choices: HashMap<(StateId, usize), Vec<(ActionId, f64)>> = HashMap::new();
    for (i, key) in graph.keys().iter().enumerate() {
        let node = graph.node(i);
        if canonical[&(node.state, node.phase)] == &key[..key.len() - 1] {
            choices.entry((node.state, node.phase)).or_default().push((node.action, table.values()[i]));
        }
    }
    let num_phases = spec.interval_law().max_len();
    let mut chosen: HashMap<(StateId, usize), ActionId> = HashMap::new();
    let mut unreachable = Vec::new();
    for s in 0..spec.num_states() {
        if spec.is_absorbing(s) {
            continue;
        }
        for phase in 0..num_phases {
            match choices.get(&(s, phase)) {
                Some(vals) => {
                    chosen.insert((s, phase), argmax_lowest(vals.iter().copied()).expect("nonempty"));
                }
                None => unreachable.push((s, phase)),
            }
        }
    }
    let policy = PolicyS::from_rows(spec, |s, phase| {
        let mut row = vec![0.0; spec.num_actions()];
        match chosen.get(&(s, phase)).or_else(|| chosen.get(&(s, 0))) {
            Some(&a) => row[a] = 1.0,
            None => {
                let avail = spec.available(s);
                for &a in avail {
                    row[a] = 1.0 / avail.len() as f64;
                }
            }
        }
        row
    })?;
    let pi_violation = graph.pi_report().filter(|r| !r.holds).cloned();
    Ok(Improvement { policy, unreachable, pi_violation })
}

#[derive(Debug, Clone)]
pub struct PolicyIterationResult {
    pub policies: Vec<PolicyS>,
    pub returns: Vec<f64>,
    pub tables: Vec<TrajectoryQTable>,
    pub converged: bool,
}

impl PolicyIterationResult {
    pub fn final_policy(&self) -> &PolicyS {
        self.policies.last().expect("at least the initial policy")
    }

    pub fn final_return(&self) -> f64 {
        *self.returns.last().expect("at least one evaluation")
    }
}

/// Alternate exact evaluation and greedy improvement in `Π_s` until the policy repeats.
/// `policies[i]` is evaluated into `tables[i]` and `returns[i]`.
pub fn policy_iteration(spec: &DrmdpSpec, init: &PolicyS, max_iters: usize) -> Result<PolicyIterationResult> {
    let graph: Arc<KeyGraph> = KeyGraph::build(spec)?;
    init.validate(spec)?;
    let mut out = PolicyIterationResult { policies: vec![init.clone()], returns: Vec::new(), tables: Vec::new(), converged: false };
    for _ in 0..max_iters {
        let current = out.policies.last().unwrap().clone();
        let q = solve_fixed_point(&graph, &current, DEFAULT_TOL, DEFAULT_MAX_SWEEPS)?;
        out.returns.push(policy_value(&q, &current)?);
        let next = policy_improve(&q)?.policy;
        out.tables.push(q);
        if next == current {
            out.converged = true;
            return Ok(out);
        }
        out.policies.push(next);
    }
    // Evaluate the last proposal so every policy has a value.
    let last = out.policies.last().unwrap().clone();
    let q = solve_fixed_point(&graph, &last, DEFAULT_TOL, DEFAULT_MAX_SWEEPS)?;
    out.returns.push(policy_value(&q, &last)?);
    out.tables.push(q);
    Ok(out)
}
