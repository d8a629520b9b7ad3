use std::sync::Arc;

use super::graph::KeyGraph;
use super::solve::TrajectoryQTable;
use crate::drmdp::{DrmdpSpec, Policy, Step, TrajectorySegment};
use crate::error::{Error, Result};

/// Paths whose discounted weight bound falls below this are dropped.
const PRUNE: f64 = 1e-15;

struct Walker<'a> {
    spec: &'a DrmdpSpec,
    policy: &'a dyn Policy,
    horizon: usize,
    bound: f64,
    tail: f64,
}

impl Walker<'_> {
    fn interval_reward(&self, seg: &[Step], full: bool) -> Result<f64> {
        let seg = TrajectorySegment::new(seg.to_vec(), self.spec.overlap());
        if full {
            self.spec.evaluate_reward(&seg)
        } else {
            Ok(self.spec.evaluate_truncated(&seg)?.unwrap_or(0.0))
        }
    }

    /// Expected discounted reward from the running segment `seg` (prefix + body, last step
    /// just taken) onward; `weight` is path probability times `γ^offset`.
    fn walk(&mut self, seg: &mut Vec<Step>, offset: usize, weight: f64) -> Result<f64> {
        let spec = self.spec;
        let gamma = spec.gamma();
        if weight * self.bound < PRUNE {
            self.tail += weight * self.bound;
            return Ok(0.0);
        }
        if offset >= self.horizon {
            return Err(Error::HorizonInsufficient { horizon: self.horizon, tail: weight * self.bound });
        }
        let c = spec.overlap();
        let Some(Step::Act { state, action }) = seg.last().copied() else {
            unreachable!()
        };
        let k = seg.len() - c;
        let q = spec.interval_law();
        // Probability that the interval closes at k given it reached k.
        let h = if k >= q.max_len() { 1.0 } else { q.prob(k) / q.survival(k) };
        let mut total = 0.0;
        for &(t, p) in spec.transition(state, action) {
            if p <= 0.0 {
                continue;
            }
            if spec.is_absorbing(t) {
                total += p * self.interval_reward(seg, h > 0.0)?;
                continue;
            }
            if h > 0.0 {
                total += p * h * self.interval_reward(seg, true)?;
                let mut fresh = seg[seg.len() - c..].to_vec();
                let row = self
                    .policy
                    .action_probs(&fresh, t, 0)
                    .ok_or_else(|| Error::MissingPolicyRow { history: fresh.clone(), state: t })?
                    .to_vec();
                for (a, &pa) in row.iter().enumerate() {
                    if pa > 0.0 {
                        fresh.push(Step::new(t, a));
                        total += p * h * pa * gamma * self.walk(&mut fresh, offset + 1, weight * p * h * pa * gamma)?;
                        fresh.pop();
                    }
                }
            }
            if h < 1.0 {
                let row = self
                    .policy
                    .action_probs(seg, t, k)
                    .ok_or_else(|| Error::MissingPolicyRow { history: seg.clone(), state: t })?
                    .to_vec();
                for (a, &pa) in row.iter().enumerate() {
                    if pa > 0.0 {
                        seg.push(Step::new(t, a));
                        let w = p * (1.0 - h) * pa;
                        total += w * gamma * self.walk(seg, offset + 1, weight * w * gamma)?;
                        seg.pop();
                    }
                }
            }
        }
        Ok(total)
    }
}

/// Independent oracle for `𝒬^π`: expand every continuation path from each key, summing
/// discounted interval rewards, up to `horizon` further steps.
///
/// Fails with [`Error::HorizonInsufficient`] if a path with non-negligible discounted mass
/// is still running at the horizon.
pub fn exact_q_by_enumeration(spec: &DrmdpSpec, policy: &dyn Policy, horizon: usize) -> Result<TrajectoryQTable> {
    let graph: Arc<KeyGraph> = KeyGraph::build(spec)?;
    let bound = spec.reward_bound().max(1e-300) / (1.0 - spec.gamma());
    let mut walker = Walker { spec, policy, horizon, bound, tail: 0.0 };
    let mut values = Vec::with_capacity(graph.len());
    for key in graph.keys() {
        let mut seg = key.clone();
        values.push(walker.walk(&mut seg, 0, 1.0)?);
    }
    TrajectoryQTable::from_values(&graph, values)
}
