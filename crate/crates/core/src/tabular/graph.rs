use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use crate::drmdp::{
    check_pi_condition, feasible_segments, ActionId, DrmdpSpec, PiReport, Policy, StateId, Step, TrajectorySegment,
};
use crate::error::{Error, Result};

/// Default cap on the number of trajectory keys a graph may hold.
pub const DEFAULT_KEY_CAP: usize = 1_000_000;

/// Where a non-absorbing successor leads.
#[derive(Debug, Clone, PartialEq)]
pub struct Successor {
    pub state: StateId,
    pub prob: f64,
    pub absorbing: bool,
    /// Keys reached when the interval continues, one per available action.
    pub extend: Vec<(ActionId, usize)>,
    /// Keys reached when the interval closes here and a new one starts.
    pub restart: Vec<(ActionId, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyNode {
    pub state: StateId,
    pub action: ActionId,
    /// Zero-based position of the last step inside its interval.
    pub phase: usize,
    pub hazard: f64,
    /// Interval reward paid if the interval closes at this key (0 when it never can).
    pub reward: f64,
    /// False for a truncated tabulated segment without an entry.
    pub reward_defined: bool,
    pub successors: Vec<Successor>,
}

/// All reachable trajectory keys of a spec with their transition structure.
#[derive(Debug)]
pub struct KeyGraph {
    spec: DrmdpSpec,
    keys: Vec<Vec<Step>>,
    index: HashMap<Vec<Step>, usize>,
    nodes: Vec<KeyNode>,
    roots: Vec<(StateId, f64, Vec<(ActionId, usize)>)>,
    pi: OnceLock<Option<PiReport>>,
}

impl KeyGraph {
    pub fn build(spec: &DrmdpSpec) -> Result<Arc<Self>> {
        Self::build_with_cap(spec, DEFAULT_KEY_CAP)
    }

    pub fn build_with_cap(spec: &DrmdpSpec, cap: usize) -> Result<Arc<Self>> {
        let c = spec.overlap();
        let found = feasible_segments(spec, spec.interval_law().max_len(), cap)?;
        let keys: Vec<Vec<Step>> = found.keys.into_iter().collect();
        let index: HashMap<Vec<Step>, usize> = keys.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
        let lookup = |k: &[Step]| {
            index
                .get(k)
                .copied()
                .ok_or_else(|| Error::InvalidInput(format!("unreachable key `{}`", spec.format_segment(k))))
        };
        let mut nodes = Vec::with_capacity(keys.len());
        for key in &keys {
            let Some(Step::Act { state, action }) = key.last().copied() else {
                unreachable!("keys end in a real step");
            };
            let k = key.len() - c;
            let hazard = spec.interval_law().hazard(k);
            let (reward, reward_defined) = match found.completed.get(key) {
                None => (0.0, true),
                Some(cl) => {
                    let seg = TrajectorySegment::new(key.clone(), c);
                    if cl.by_hazard {
                        (spec.evaluate_reward(&seg)?, true)
                    } else {
                        match spec.evaluate_truncated(&seg)? {
                            Some(r) => (r, true),
                            None => (0.0, false),
                        }
                    }
                }
            };
            let mut successors = Vec::new();
            for &(t, prob) in spec.transition(state, action) {
                if prob <= 0.0 {
                    continue;
                }
                let absorbing = spec.is_absorbing(t);
                let mut extend = Vec::new();
                let mut restart = Vec::new();
                if !absorbing {
                    let mut next = key.clone();
                    next.push(Step::Pad);
                    let last = next.len() - 1;
                    if hazard < 1.0 {
                        for &a in spec.available(t) {
                            next[last] = Step::new(t, a);
                            extend.push((a, lookup(&next)?));
                        }
                    }
                    if hazard > 0.0 {
                        let mut fresh = key[key.len() - c..].to_vec();
                        fresh.push(Step::Pad);
                        for &a in spec.available(t) {
                            fresh[c] = Step::new(t, a);
                            restart.push((a, lookup(&fresh)?));
                        }
                    }
                }
                successors.push(Successor { state: t, prob, absorbing, extend, restart });
            }
            nodes.push(KeyNode { state, action, phase: k - 1, hazard, reward, reward_defined, successors });
        }
        let mut roots = Vec::new();
        for (s, &p) in spec.initial().iter().enumerate() {
            if p > 0.0 {
                let mut key = spec.start_prefix();
                key.push(Step::Pad);
                let mut acts = Vec::new();
                for &a in spec.available(s) {
                    key[c] = Step::new(s, a);
                    acts.push((a, lookup(&key)?));
                }
                roots.push((s, p, acts));
            }
        }
        Ok(Arc::new(Self { spec: spec.clone(), keys, index, nodes, roots, pi: OnceLock::new() }))
    }

    pub fn spec(&self) -> &DrmdpSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Keys in lexicographic order (padding first).
    pub fn keys(&self) -> &[Vec<Step>] {
        &self.keys
    }

    pub fn key(&self, i: usize) -> &[Step] {
        &self.keys[i]
    }

    pub fn index_of(&self, key: &[Step]) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn node(&self, i: usize) -> &KeyNode {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[KeyNode] {
        &self.nodes
    }

    /// `(initial state, p0, [(action, root key)])`.
    pub fn roots(&self) -> &[(StateId, f64, Vec<(ActionId, usize)>)] {
        &self.roots
    }

    /// Keys whose truncated tabulated reward was missing and paid as 0.
    pub fn undefined_rewards(&self) -> usize {
        self.nodes.iter().filter(|n| !n.reward_defined).count()
    }

    /// Cached PI-condition report over the full interval length; `None` if the check
    /// itself exceeded its enumeration caps.
    pub fn pi_report(&self) -> Option<&PiReport> {
        self.pi
            .get_or_init(|| check_pi_condition(&self.spec, self.spec.interval_law().max_len()).ok())
            .as_ref()
    }

    /// Expected immediate reward and successor distribution of every key under `policy`.
    pub fn compile(&self, policy: &dyn Policy) -> Result<Kernel> {
        let c = self.spec.overlap();
        let mut reward = Vec::with_capacity(self.nodes.len());
        let mut offsets = Vec::with_capacity(self.nodes.len() + 1);
        let mut targets = Vec::new();
        let mut probs = Vec::new();
        offsets.push(0);
        for (i, node) in self.nodes.iter().enumerate() {
            let key = &self.keys[i];
            let mut r = 0.0;
            for succ in &node.successors {
                if succ.absorbing {
                    r += succ.prob * node.reward;
                    continue;
                }
                r += succ.prob * node.hazard * node.reward;
                if !succ.extend.is_empty() {
                    let row = policy
                        .action_probs(key, succ.state, node.phase + 1)
                        .ok_or_else(|| Error::MissingPolicyRow { history: key.clone(), state: succ.state })?;
                    for &(a, j) in &succ.extend {
                        let w = succ.prob * (1.0 - node.hazard) * row[a];
                        if w > 0.0 {
                            targets.push(j);
                            probs.push(w);
                        }
                    }
                }
                if !succ.restart.is_empty() {
                    let hist = &key[key.len() - c..];
                    let row = policy
                        .action_probs(hist, succ.state, 0)
                        .ok_or_else(|| Error::MissingPolicyRow { history: hist.to_vec(), state: succ.state })?;
                    for &(a, j) in &succ.restart {
                        let w = succ.prob * node.hazard * row[a];
                        if w > 0.0 {
                            targets.push(j);
                            probs.push(w);
                        }
                    }
                }
            }
            reward.push(r);
            offsets.push(targets.len());
        }
        let mut root_weights = Vec::new();
        for (s, p, acts) in &self.roots {
            let hist = self.spec.start_prefix();
            let row = policy
                .action_probs(&hist, *s, 0)
                .ok_or_else(|| Error::MissingPolicyRow { history: hist.clone(), state: *s })?;
            for &(a, j) in acts {
                if row[a] > 0.0 {
                    root_weights.push((j, p * row[a]));
                }
            }
        }
        Ok(Kernel { reward, offsets, targets, probs, root_weights, gamma: self.spec.gamma() })
    }
}

/// Policy-specific linear form of the Bellman operator: `Q = R + γ P Q`.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub(crate) reward: Vec<f64>,
    pub(crate) offsets: Vec<usize>,
    pub(crate) targets: Vec<usize>,
    pub(crate) probs: Vec<f64>,
    pub(crate) root_weights: Vec<(usize, f64)>,
    pub(crate) gamma: f64,
}

impl Kernel {
    pub fn apply(&self, target: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for e in self.offsets[i]..self.offsets[i + 1] {
                acc += self.probs[e] * target[self.targets[e]];
            }
            *o = self.reward[i] + self.gamma * acc;
        }
    }

    pub fn start_value(&self, q: &[f64]) -> f64 {
        self.root_weights.iter().map(|&(j, w)| w * q[j]).sum()
    }

    /// Successor keys and their probabilities for key `i`.
    pub fn successors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.offsets[i]..self.offsets[i + 1]).map(|e| (self.targets[e], self.probs[e]))
    }
}
