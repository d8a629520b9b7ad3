//! Plain per-step MDP solvers on the `r̂` table of a spec, used as a reference where the
//! delayed model collapses to the classical one (every interval of length 1, overlap 0).

use crate::drmdp::{DrmdpSpec, PolicyS};
use crate::error::{Error, Result};

use super::improve::argmax_lowest;
use super::solve::DEFAULT_MAX_SWEEPS;

fn per_step_parts(spec: &DrmdpSpec) -> Result<&crate::drmdp::PerStepTable> {
    spec.reward()
        .per_step()
        .ok_or_else(|| Error::InvalidInput("classical solver needs a per-step reward table".into()))
}

fn iterate(spec: &DrmdpSpec, tol: f64, mut backup: impl FnMut(&[f64], usize, usize) -> f64) -> Result<Vec<f64>> {
    let na = spec.num_actions();
    let stop = tol * (1.0 - spec.gamma());
    let mut q = vec![0.0; spec.num_states() * na];
    let mut next = q.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..DEFAULT_MAX_SWEEPS {
        for s in 0..spec.num_states() {
            for &a in spec.available(s) {
                next[s * na + a] = backup(&q, s, a);
            }
        }
        residual = q.iter().zip(&next).fold(0.0, |m, (x, y)| m.max((x - y).abs()));
        std::mem::swap(&mut q, &mut next);
        if residual <= stop {
            return Ok(q);
        }
    }
    Err(Error::NoConvergence { sweeps: DEFAULT_MAX_SWEEPS, residual })
}

/// `Q^π(s, a)` for the phase-0 rows of `policy`, indexed `s * num_actions + a`.
pub fn classical_q(spec: &DrmdpSpec, policy: &PolicyS, tol: f64) -> Result<Vec<f64>> {
    let r = per_step_parts(spec)?;
    let na = spec.num_actions();
    let gamma = spec.gamma();
    iterate(spec, tol, |q, s, a| {
        let mut v = r.get(s, a);
        for &(t, p) in spec.transition(s, a) {
            if !spec.is_absorbing(t) {
                v += gamma * p * spec.available(t).iter().map(|&b| policy.prob(t, 0, b) * q[t * na + b]).sum::<f64>();
            }
        }
        v
    })
}

/// `Q*` and a greedy stationary policy.
pub fn classical_optimal(spec: &DrmdpSpec, tol: f64) -> Result<(Vec<f64>, PolicyS)> {
    let r = per_step_parts(spec)?;
    let na = spec.num_actions();
    let gamma = spec.gamma();
    let q = iterate(spec, tol, |q, s, a| {
        let mut v = r.get(s, a);
        for &(t, p) in spec.transition(s, a) {
            if !spec.is_absorbing(t) {
                v += gamma
                    * p
                    * spec.available(t).iter().map(|&b| q[t * na + b]).fold(f64::NEG_INFINITY, f64::max);
            }
        }
        v
    })?;
    let policy = PolicyS::deterministic(spec, |s, _| {
        argmax_lowest(spec.available(s).iter().map(|&a| (a, q[s * na + a]))).expect("nonempty")
    })?;
    Ok((q, policy))
}

/// `Σ p0(s) π(a|s) Q(s, a)`.
pub fn classical_value(spec: &DrmdpSpec, policy: &PolicyS, q: &[f64]) -> f64 {
    let na = spec.num_actions();
    (0..spec.num_states())
        .filter(|&s| spec.initial()[s] > 0.0)
        .map(|s| {
            spec.initial()[s] * spec.available(s).iter().map(|&a| policy.prob(s, 0, a) * q[s * na + a]).sum::<f64>()
        })
        .sum()
}
