//! Bias of the `(s, a)` fixed point when data from several behaviors is pooled.
//!
//! Setting: a single interval of fixed length `n + 1` covering the whole episode, sum-form
//! reward with overlap 0. The fitted `Q̃(s_n, a_n)` mixes the reward already collected in
//! the history, weighted by how often each behavior reaches `s_n` and then picks `a_n`.

use std::collections::BTreeMap;

use crate::drmdp::{ActionId, DrmdpSpec, PolicyS, RewardFunctional, StateId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BiasEntry {
    pub state: StateId,
    pub action: ActionId,
    /// History-reward part of `Q̃(s_n, a_n)`; `None` when no behavior takes `a_n` at `s_n`.
    pub bias: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffPolicyBiasReport {
    pub entries: Vec<BiasEntry>,
    /// Largest spread of the bias across actions at one `s_n`.
    pub max_spread: f64,
}

impl OffPolicyBiasReport {
    pub fn varies(&self) -> bool {
        self.max_spread > 1e-12
    }

    pub fn bias(&self, s: StateId, a: ActionId) -> Option<f64> {
        self.entries.iter().find(|e| e.state == s && e.action == a).and_then(|e| e.bias)
    }
}

/// Per behavior and `s_n`: reach probability and expected history reward times it.
fn history_moments(spec: &DrmdpSpec, pi: &PolicyS, n: usize) -> BTreeMap<StateId, (f64, f64)> {
    let per_step = spec.reward().per_step().expect("checked by caller");
    let mut out = BTreeMap::new();
    // (state, probability, accumulated reward) after `t` steps.
    let mut front: Vec<(StateId, f64, f64)> =
        spec.initial().iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(s, &p)| (s, p, 0.0)).collect();
    for t in 0..n {
        let mut next = Vec::new();
        for &(s, p, r) in &front {
            for &a in spec.available(s) {
                let pa = pi.prob(s, t, a);
                if pa <= 0.0 {
                    continue;
                }
                for &(s2, ps) in spec.transition(s, a) {
                    if ps > 0.0 && !spec.is_absorbing(s2) {
                        next.push((s2, p * pa * ps, r + per_step.get(s, a)));
                    }
                }
            }
        }
        front = next;
    }
    for (s, p, r) in front {
        let e = out.entry(s).or_insert((0.0, 0.0));
        e.0 += p;
        e.1 += p * r;
    }
    out
}

/// `Q̃(s_n, a_n) − E[r̂(s_n, a_n)]` under pooled data, using the exact Bayes weighting
/// `Σ_k P_k(s_n) β_k(a_n|s_n) E_k[R_hist | s_n] / Σ_k P_k(s_n) β_k(a_n|s_n)`.
pub fn off_policy_bias_report(spec: &DrmdpSpec, behaviors: &[PolicyS]) -> Result<OffPolicyBiasReport> {
    if behaviors.is_empty() {
        return Err(Error::InvalidInput("no behaviors given".into()));
    }
    let law = spec.interval_law();
    if law.support().len() != 1 || spec.overlap() != 0 || !matches!(spec.reward(), RewardFunctional::Sum { .. }) {
        return Err(Error::InvalidInput(
            "bias report needs one fixed interval length, overlap 0 and a sum reward".into(),
        ));
    }
    let len = law.max_len();
    let n = len - 1;
    for pi in behaviors {
        pi.validate(spec)?;
    }
    check_single_interval(spec, len)?;
    let moments: Vec<_> = behaviors.iter().map(|pi| history_moments(spec, pi, n)).collect();
    let mut states: Vec<StateId> = moments.iter().flat_map(|m| m.keys().copied()).collect();
    states.sort_unstable();
    states.dedup();
    let mut entries = Vec::new();
    let mut max_spread: f64 = 0.0;
    for &s in &states {
        let mut defined = Vec::new();
        for &a in spec.available(s) {
            let (mut num, mut den) = (0.0, 0.0);
            for (pi, m) in behaviors.iter().zip(&moments) {
                if let Some(&(p, pr)) = m.get(&s) {
                    let b = pi.prob(s, n, a);
                    num += b * pr;
                    den += b * p;
                }
            }
            let bias = (den > 0.0).then(|| num / den);
            if let Some(b) = bias {
                defined.push(b);
            }
            entries.push(BiasEntry { state: s, action: a, bias });
        }
        if let (Some(lo), Some(hi)) = (
            defined.iter().copied().reduce(f64::min),
            defined.iter().copied().reduce(f64::max),
        ) {
            max_spread = max_spread.max(hi - lo);
        }
    }
    Ok(OffPolicyBiasReport { entries, max_spread })
}

/// Every path must survive `len − 1` steps and be absorbed right after step `len`.
fn check_single_interval(spec: &DrmdpSpec, len: usize) -> Result<()> {
    let mut front: Vec<StateId> = (0..spec.num_states()).filter(|&s| spec.initial()[s] > 0.0).collect();
    for t in 0..len {
        let mut next = Vec::new();
        for &s in &front {
            for &a in spec.available(s) {
                for &(s2, p) in spec.transition(s, a) {
                    if p <= 0.0 {
                        continue;
                    }
                    if spec.is_absorbing(s2) != (t + 1 == len) {
                        return Err(Error::InvalidInput(
                            "episodes must consist of exactly one interval".into(),
                        ));
                    }
                    if !spec.is_absorbing(s2) && !next.contains(&s2) {
                        next.push(s2);
                    }
                }
            }
        }
        front = next;
    }
    Ok(())
}
