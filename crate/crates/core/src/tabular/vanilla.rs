//! Fixed point of the standard `Q(s, a)` update trained on delayed interval rewards.
//!
//! The data distribution is the on-policy occupancy of one or more behaviors in the limit
//! of vanishing uniform exploration. Every key's occupancy is tracked as a leading-order
//! term `coef · ε^order`; a pair `(s, a)` is then defined by the keys of lowest order that
//! end in it.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::graph::KeyGraph;
use super::improve::argmax_lowest;
use super::solve::{policy_value, solve_fixed_point, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
use crate::drmdp::{ActionId, DrmdpSpec, PolicyS, StateId};
use crate::error::{Error, Result};

const OCC_ITERS: usize = 1_000_000;
const OCC_TOL: f64 = 1e-16;

/// Dense `Q(s, a)`; `None` for pairs the dynamics never reach.
#[derive(Debug, Clone, PartialEq)]
pub struct StateQTable {
    num_actions: usize,
    values: Vec<Option<f64>>,
}

impl StateQTable {
    pub fn get(&self, s: StateId, a: ActionId) -> Option<f64> {
        self.values[s * self.num_actions + a]
    }

    pub fn undefined(&self, spec: &DrmdpSpec) -> Vec<(StateId, ActionId)> {
        (0..spec.num_states())
            .flat_map(|s| spec.available(s).iter().map(move |&a| (s, a)))
            .filter(|&(s, a)| self.get(s, a).is_none())
            .collect()
    }
}

struct Edges {
    /// `(from, to, weight)` taken with an on-policy action.
    on: Vec<(usize, usize, f64)>,
    /// Same with an action outside the behavior's support (one order of ε).
    off: Vec<(usize, usize, f64)>,
    init_on: Vec<(usize, f64)>,
    init_off: Vec<(usize, f64)>,
}

fn edges(graph: &KeyGraph, pi: &PolicyS) -> Edges {
    let spec = graph.spec();
    let mut e = Edges { on: Vec::new(), off: Vec::new(), init_on: Vec::new(), init_off: Vec::new() };
    let split = |s: StateId, phase: usize, a: ActionId| -> (bool, f64) {
        let p = pi.prob(s, phase, a);
        if p > 0.0 {
            (true, p)
        } else {
            (false, 1.0 / spec.available(s).len() as f64)
        }
    };
    for (s, p0, acts) in graph.roots() {
        for &(a, j) in acts {
            let (on, w) = split(*s, 0, a);
            if on { &mut e.init_on } else { &mut e.init_off }.push((j, p0 * w));
        }
    }
    for (i, node) in graph.nodes().iter().enumerate() {
        for succ in &node.successors {
            for (list, phase, factor) in [(&succ.extend, node.phase + 1, 1.0 - node.hazard), (&succ.restart, 0, node.hazard)] {
                for &(a, j) in list {
                    let (on, w) = split(succ.state, phase, a);
                    let weight = succ.prob * factor * w;
                    if weight > 0.0 {
                        if on { &mut e.on } else { &mut e.off }.push((i, j, weight));
                    }
                }
            }
        }
    }
    e
}

/// Accumulate `Σ_t source · P_on^t`.
fn propagate(n: usize, on: &[(usize, usize, f64)], source: Vec<f64>) -> Result<Vec<f64>> {
    let mut occ = source.clone();
    let mut front = source;
    let mut next = vec![0.0; n];
    for _ in 0..OCC_ITERS {
        let mass: f64 = front.iter().sum();
        if mass <= OCC_TOL {
            return Ok(occ);
        }
        next.iter_mut().for_each(|x| *x = 0.0);
        for &(i, j, w) in on {
            next[j] += front[i] * w;
        }
        std::mem::swap(&mut front, &mut next);
        for (o, f) in occ.iter_mut().zip(&front) {
            *o += f;
        }
    }
    Err(Error::InvalidInput("behavior occupancy does not vanish; the spec must be episodic".into()))
}

/// Leading-order occupancy of every key: `orders[o][k]` is the coefficient of `ε^o`.
fn occupancy_by_order(graph: &KeyGraph, pi: &PolicyS, needed: &BTreeSet<(StateId, ActionId)>) -> Result<Vec<Vec<f64>>> {
    let n = graph.len();
    let e = edges(graph, pi);
    let mut orders: Vec<Vec<f64>> = Vec::new();
    let mut covered: BTreeSet<(StateId, ActionId)> = BTreeSet::new();
    for o in 0..=n {
        let mut source = vec![0.0; n];
        if o == 0 {
            for &(j, w) in &e.init_on {
                source[j] += w;
            }
        } else {
            if o == 1 {
                for &(j, w) in &e.init_off {
                    source[j] += w;
                }
            }
            let prev = &orders[o - 1];
            for &(i, j, w) in &e.off {
                source[j] += prev[i] * w;
            }
        }
        let occ = propagate(n, &e.on, source)?;
        for (k, &x) in occ.iter().enumerate() {
            if x > 0.0 {
                let node = graph.node(k);
                covered.insert((node.state, node.action));
            }
        }
        orders.push(occ);
        if needed.is_subset(&covered) {
            break;
        }
    }
    Ok(orders)
}

/// Fixed point of `Q(s,a) ← E_D[R + γ Q(s', a')]` under the mixture `Σ_b w_b β_b` of
/// behaviors with vanishing exploration. `R` is the interval reward when the interval
/// closes at the current step and 0 otherwise; `a'` follows the behavior that produced
/// the sample.
pub fn vanilla_q_fixed_point(spec: &DrmdpSpec, data: &[(f64, PolicyS)], tol: f64) -> Result<StateQTable> {
    if data.is_empty() || data.iter().any(|(w, _)| *w <= 0.0) {
        return Err(Error::InvalidInput("behavior weights must be positive".into()));
    }
    for (_, pi) in data {
        pi.validate(spec)?;
    }
    let graph: Arc<KeyGraph> = KeyGraph::build(spec)?;
    let na = spec.num_actions();
    let needed: BTreeSet<(StateId, ActionId)> = graph.nodes().iter().map(|n| (n.state, n.action)).collect();
    let occ: Vec<Vec<Vec<f64>>> = data
        .iter()
        .map(|(_, pi)| occupancy_by_order(&graph, pi, &needed))
        .collect::<Result<_>>()?;
    // Lowest order at which each pair has data, over all behaviors.
    let mut min_order = vec![usize::MAX; spec.num_states() * na];
    for orders in &occ {
        for (o, layer) in orders.iter().enumerate() {
            for (k, &x) in layer.iter().enumerate() {
                let node = graph.node(k);
                let slot = &mut min_order[node.state * na + node.action];
                if x > 0.0 && o < *slot {
                    *slot = o;
                }
            }
        }
    }
    // Linear system Q = b + γ M Q over pair indices.
    let mut constant = vec![0.0; spec.num_states() * na];
    let mut coeffs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); spec.num_states() * na];
    let mut mass = vec![0.0; spec.num_states() * na];
    for ((w, pi), orders) in data.iter().zip(&occ) {
        for (k, node) in graph.nodes().iter().enumerate() {
            let pair = node.state * na + node.action;
            let o = min_order[pair];
            if o == usize::MAX || o >= orders.len() {
                continue;
            }
            let x = w * orders[o][k];
            if x <= 0.0 {
                continue;
            }
            mass[pair] += x;
            for succ in &node.successors {
                if succ.absorbing {
                    constant[pair] += x * succ.prob * node.reward;
                    continue;
                }
                constant[pair] += x * succ.prob * node.hazard * node.reward;
                for (phase, factor, live) in
                    [(node.phase + 1, 1.0 - node.hazard, !succ.extend.is_empty()), (0, node.hazard, !succ.restart.is_empty())]
                {
                    if !live || factor <= 0.0 {
                        continue;
                    }
                    for &a in spec.available(succ.state) {
                        let pa = pi.prob(succ.state, phase, a);
                        if pa > 0.0 {
                            coeffs[pair].push((succ.state * na + a, x * succ.prob * factor * pa));
                        }
                    }
                }
            }
        }
    }
    for pair in 0..constant.len() {
        if mass[pair] > 0.0 {
            constant[pair] /= mass[pair];
            for c in &mut coeffs[pair] {
                c.1 /= mass[pair];
            }
        }
    }
    let gamma = spec.gamma();
    let stop = tol * (1.0 - gamma);
    let mut q = vec![0.0; constant.len()];
    let mut next = q.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..DEFAULT_MAX_SWEEPS {
        for pair in 0..q.len() {
            next[pair] = constant[pair] + gamma * coeffs[pair].iter().map(|&(j, c)| c * q[j]).sum::<f64>();
        }
        residual = q.iter().zip(&next).fold(0.0, |m, (a, b)| m.max((a - b).abs()));
        std::mem::swap(&mut q, &mut next);
        if residual <= stop {
            let values = (0..q.len()).map(|p| (mass[p] > 0.0).then_some(q[p])).collect();
            return Ok(StateQTable { num_actions: na, values });
        }
    }
    Err(Error::NoConvergence { sweeps: DEFAULT_MAX_SWEEPS, residual })
}

/// Phase-independent greedy policy on a state table; undefined pairs are skipped and a
/// state with no defined pair keeps its lowest available action.
pub fn greedy_vanilla_policy(spec: &DrmdpSpec, q: &StateQTable) -> Result<PolicyS> {
    PolicyS::deterministic(spec, |s, _| {
        argmax_lowest(spec.available(s).iter().filter_map(|&a| q.get(s, a).map(|v| (a, v))))
            .unwrap_or(spec.available(s)[0])
    })
}

#[derive(Debug, Clone)]
pub struct VanillaIterationResult {
    pub policies: Vec<PolicyS>,
    /// True returns `J(π)` of each policy, from the trajectory solver.
    pub returns: Vec<f64>,
    pub tables: Vec<StateQTable>,
    pub converged: bool,
}

/// On-policy iteration of the standard update: fit `Q` to the current policy's data, act
/// greedily, repeat until the policy repeats.
pub fn vanilla_policy_iteration(spec: &DrmdpSpec, init: &PolicyS, max_iters: usize) -> Result<VanillaIterationResult> {
    let graph = KeyGraph::build(spec)?;
    let mut out = VanillaIterationResult { policies: vec![init.clone()], returns: Vec::new(), tables: Vec::new(), converged: false };
    for _ in 0..max_iters {
        let current = out.policies.last().unwrap().clone();
        let truth = solve_fixed_point(&graph, &current, DEFAULT_TOL, DEFAULT_MAX_SWEEPS)?;
        out.returns.push(policy_value(&truth, &current)?);
        let q = vanilla_q_fixed_point(spec, &[(1.0, current.clone())], DEFAULT_TOL)?;
        let next = greedy_vanilla_policy(spec, &q)?;
        out.tables.push(q);
        if out.policies.contains(&next) {
            out.converged = next == current;
            if !out.converged {
                out.policies.push(next.clone());
                let truth = solve_fixed_point(&graph, &next, DEFAULT_TOL, DEFAULT_MAX_SWEEPS)?;
                out.returns.push(policy_value(&truth, &next)?);
            }
            return Ok(out);
        }
        out.policies.push(next);
    }
    Ok(out)
}
