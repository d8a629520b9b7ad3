use std::io::Write;
use std::sync::Arc;

use super::graph::KeyGraph;
use crate::drmdp::{DrmdpSpec, Policy, Step};
use crate::error::{Error, Result};

/// Default sup-norm tolerance on the distance to the fixed point.
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_SWEEPS: usize = 2_000_000;

/// `𝒬` values over the keys of a [`KeyGraph`].
#[derive(Debug, Clone)]
pub struct TrajectoryQTable {
    graph: Arc<KeyGraph>,
    values: Vec<f64>,
}

impl TrajectoryQTable {
    pub fn zeros(graph: &Arc<KeyGraph>) -> Self {
        Self { graph: Arc::clone(graph), values: vec![0.0; graph.len()] }
    }

    pub fn from_values(graph: &Arc<KeyGraph>, values: Vec<f64>) -> Result<Self> {
        if values.len() != graph.len() {
            return Err(Error::KeyMismatch);
        }
        Ok(Self { graph: Arc::clone(graph), values })
    }

    pub fn graph(&self) -> &Arc<KeyGraph> {
        &self.graph
    }

    pub fn spec(&self) -> &DrmdpSpec {
        self.graph.spec()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, key: &[Step]) -> Option<f64> {
        self.graph.index_of(key).map(|i| self.values[i])
    }

    /// Look up by the `state.action` token syntax.
    pub fn get_named(&self, segment: &str) -> Result<f64> {
        let key = self.spec().parse_segment(segment)?;
        self.get(&key)
            .ok_or_else(|| Error::InvalidInput(format!("`{segment}` is not a reachable key")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[Step], f64)> {
        self.graph.keys().iter().map(Vec::as_slice).zip(self.values.iter().copied())
    }

    fn same_keys(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.graph, &other.graph) || self.graph.keys() == other.graph.keys()
    }

    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        if !self.same_keys(other) {
            return Err(Error::KeyMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// CSV with one row per key: `segment,state,action,phase,q`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let spec = self.spec();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["segment", "state", "action", "phase", "q"])?;
        for (i, key) in self.graph.keys().iter().enumerate() {
            let node = self.graph.node(i);
            w.write_record([
                spec.format_segment(key),
                spec.state_name(node.state).to_string(),
                spec.action_name(node.action).to_string(),
                node.phase.to_string(),
                format!("{}", self.values[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One application of the trajectory Bellman operator for `policy` to `target`.
/// The result is the exact minimizer of the squared TD loss with the target held fixed.
pub fn bellman_sweep(
    table: &TrajectoryQTable,
    target: &TrajectoryQTable,
    policy: &dyn Policy,
) -> Result<TrajectoryQTable> {
    if !table.same_keys(target) {
        return Err(Error::KeyMismatch);
    }
    let kernel = target.graph.compile(policy)?;
    let mut out = vec![0.0; target.len()];
    kernel.apply(&target.values, &mut out);
    Ok(TrajectoryQTable { graph: Arc::clone(&target.graph), values: out })
}

/// Iterate the Bellman operator from zero until the sup-norm distance to the fixed point is
/// provably below `tol` (successive change at most `tol·(1−γ)`).
pub fn solve_fixed_point(
    graph: &Arc<KeyGraph>,
    policy: &dyn Policy,
    tol: f64,
    max_sweeps: usize,
) -> Result<TrajectoryQTable> {
    let kernel = graph.compile(policy)?;
    let gamma = graph.spec().gamma();
    let stop = tol * (1.0 - gamma);
    let mut cur = vec![0.0; graph.len()];
    let mut next = vec![0.0; graph.len()];
    let mut residual = f64::INFINITY;
    for _ in 0..max_sweeps {
        kernel.apply(&cur, &mut next);
        residual = cur.iter().zip(&next).fold(0.0, |m, (a, b)| m.max((a - b).abs()));
        std::mem::swap(&mut cur, &mut next);
        if !residual.is_finite() {
            return Err(Error::Divergence("Bellman iteration produced a non-finite value".into()));
        }
        if residual <= stop {
            return Ok(TrajectoryQTable { graph: Arc::clone(graph), values: cur });
        }
    }
    Err(Error::NoConvergence { sweeps: max_sweeps, residual })
}

/// `J(π) = Σ p0(s0) π(a0|s0) 𝒬(pad^c ∘ (s0, a0))`.
pub fn policy_value(table: &TrajectoryQTable, policy: &dyn Policy) -> Result<f64> {
    let kernel = table.graph.compile(policy)?;
    Ok(kernel.start_value(&table.values))
}

/// Fixed point and return of `policy` on `spec`.
pub fn evaluate_policy(spec: &DrmdpSpec, policy: &dyn Policy) -> Result<(TrajectoryQTable, f64)> {
    let graph = KeyGraph::build(spec)?;
    let q = solve_fixed_point(&graph, policy, DEFAULT_TOL, DEFAULT_MAX_SWEEPS)?;
    let j = policy_value(&q, policy)?;
    Ok((q, j))
}
