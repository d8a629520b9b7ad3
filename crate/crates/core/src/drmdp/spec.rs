use std::collections::BTreeMap;

use rand::Rng;

use super::reward::{PerStepTable, RewardFunctional, RewardKind};
use super::{ActionId, StateId, Step, TrajectorySegment};
use crate::error::{Error, Result};

/// Absolute tolerance for probability-vector normalization checks.
pub const PROB_TOL: f64 = 1e-12;

/// Distribution `q_n` of signal-interval lengths, kept together with its hazard form.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalLaw {
    support: Vec<usize>,
    probs: Vec<f64>,
}

impl IntervalLaw {
    pub fn new(mut pairs: Vec<(usize, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidSpec("interval law support is empty".into()));
        }
        pairs.sort_by_key(|&(n, _)| n);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidSpec(format!("interval length {} listed twice", w[0].0)));
            }
        }
        if pairs[0].0 == 0 {
            return Err(Error::InvalidSpec("interval lengths must be positive".into()));
        }
        if pairs.iter().any(|&(_, p)| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidSpec("interval probabilities must lie in [0,1]".into()));
        }
        let total: f64 = pairs.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidSpec(format!("interval probabilities sum to {total}")));
        }
        if pairs.last().map(|&(_, p)| p) == Some(0.0) {
            return Err(Error::InvalidSpec("largest interval length has zero probability".into()));
        }
        let (support, probs) = pairs.into_iter().unzip();
        Ok(Self { support, probs })
    }

    /// Point mass at `n`.
    pub fn fixed(n: usize) -> Result<Self> {
        Self::new(vec![(n, 1.0)])
    }

    /// Uniform over `lo..=hi`.
    pub fn uniform(lo: usize, hi: usize) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidSpec(format!("empty uniform range {lo}..={hi}")));
        }
        let m = (hi - lo + 1) as f64;
        Self::new((lo..=hi).map(|n| (n, 1.0 / m)).collect())
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn max_len(&self) -> usize {
        *self.support.last().expect("nonempty support")
    }

    pub fn prob(&self, n: usize) -> f64 {
        self.support
            .iter()
            .position(|&m| m == n)
            .map_or(0.0, |i| self.probs[i])
    }

    /// `P(n >= k)`.
    pub fn survival(&self, k: usize) -> f64 {
        self.support
            .iter()
            .zip(&self.probs)
            .filter(|&(&n, _)| n >= k)
            .map(|(_, &p)| p)
            .sum()
    }

    /// Probability that the interval closes at relative step `k` (1-based length)
    /// given that it has lasted `k` steps. Lengths beyond the support close with certainty.
    pub fn hazard(&self, k: usize) -> f64 {
        let surv = self.survival(k);
        if surv <= 0.0 || k >= self.max_len() {
            return 1.0;
        }
        (self.prob(k) / surv).clamp(0.0, 1.0)
    }

    /// Rebuild `q_n(1..=hazards.len())` from hazard values.
    pub fn probs_from_hazards(hazards: &[f64]) -> Vec<f64> {
        let mut alive = 1.0;
        hazards
            .iter()
            .map(|&h| {
                let q = alive * h;
                alive *= 1.0 - h;
                q
            })
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (&n, &p) in self.support.iter().zip(&self.probs) {
            acc += p;
            if u < acc {
                return n;
            }
        }
        self.max_len()
    }
}

/// A finite delayed-reward MDP with reward overlap `c`.
///
/// States marked absorbing have no actions; entering one ends the episode and
/// closes the running interval.
#[derive(Debug, Clone, PartialEq)]
pub struct DrmdpSpec {
    state_names: Vec<String>,
    action_names: Vec<String>,
    available: Vec<Vec<ActionId>>,
    absorbing: Vec<bool>,
    transitions: Vec<Vec<(StateId, f64)>>,
    initial: Vec<f64>,
    interval_law: IntervalLaw,
    reward: RewardFunctional,
    gamma: f64,
    overlap_c: usize,
}

impl DrmdpSpec {
    pub fn builder() -> SpecBuilder {
        SpecBuilder::default()
    }

    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn num_actions(&self) -> usize {
        self.action_names.len()
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.state_names[s]
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        &self.action_names[a]
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn action_names(&self) -> &[String] {
        &self.action_names
    }

    pub fn state_id(&self, name: &str) -> Result<StateId> {
        self.state_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownName { kind: "state", name: name.into() })
    }

    pub fn action_id(&self, name: &str) -> Result<ActionId> {
        self.action_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownName { kind: "action", name: name.into() })
    }

    pub fn available(&self, s: StateId) -> &[ActionId] {
        &self.available[s]
    }

    pub fn is_absorbing(&self, s: StateId) -> bool {
        self.absorbing[s]
    }

    pub fn transition(&self, s: StateId, a: ActionId) -> &[(StateId, f64)] {
        &self.transitions[s * self.num_actions() + a]
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn interval_law(&self) -> &IntervalLaw {
        &self.interval_law
    }

    pub fn reward(&self) -> &RewardFunctional {
        &self.reward
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn overlap(&self) -> usize {
        self.overlap_c
    }

    /// Copy of this spec with a different discount.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        let mut out = self.clone();
        out.gamma = gamma;
        out.validate()?;
        Ok(out)
    }

    /// Copy of this spec with a different interval law.
    pub fn with_interval_law(&self, law: IntervalLaw) -> Result<Self> {
        let mut out = self.clone();
        out.interval_law = law;
        out.validate()?;
        Ok(out)
    }

    /// Padded prefix used for the first interval of an episode.
    pub fn start_prefix(&self) -> Vec<Step> {
        vec![Step::Pad; self.overlap_c]
    }

    /// Render a step as `state.action`, or `_` for padding.
    pub fn format_step(&self, step: Step) -> String {
        match step {
            Step::Pad => "_".to_string(),
            Step::Act { state, action } => {
                format!("{}.{}", self.state_names[state], self.action_names[action])
            }
        }
    }

    /// Render a full segment; when `c > 0` a `|` separates the overlap prefix from the body.
    pub fn format_segment(&self, steps: &[Step]) -> String {
        let c = self.overlap_c.min(steps.len());
        let mut parts: Vec<String> = steps[..c].iter().map(|&s| self.format_step(s)).collect();
        if self.overlap_c > 0 {
            parts.push("|".into());
        }
        parts.extend(steps[c..].iter().map(|&s| self.format_step(s)));
        parts.join(" ")
    }

    pub fn parse_step(&self, token: &str) -> Result<Step> {
        if token == "_" {
            return Ok(Step::Pad);
        }
        let (s, a) = token
            .split_once('.')
            .ok_or_else(|| Error::Parse(format!("step `{token}` is not of the form state.action")))?;
        Ok(Step::Act { state: self.state_id(s)?, action: self.action_id(a)? })
    }

    pub fn parse_segment(&self, text: &str) -> Result<Vec<Step>> {
        text.split_whitespace()
            .filter(|t| *t != "|")
            .map(|t| self.parse_step(t))
            .collect()
    }

    /// Whether every consecutive pair of real steps in `steps` has positive transition probability.
    pub fn is_feasible(&self, steps: &[Step]) -> bool {
        steps.windows(2).all(|w| match (w[0], w[1]) {
            (Step::Act { state, action }, Step::Act { state: next, .. }) => self
                .transition(state, action)
                .iter()
                .any(|&(s, p)| s == next && p > 0.0),
            (Step::Act { .. }, Step::Pad) => false,
            (Step::Pad, _) => true,
        })
    }

    /// Largest absolute per-interval reward over the provided segments; used for tail bounds.
    pub(crate) fn reward_bound(&self) -> f64 {
        self.reward.magnitude_bound(self.interval_law.max_len() + self.overlap_c)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let ns = self.num_states();
        let na = self.num_actions();
        if ns == 0 {
            return Err(Error::InvalidSpec("no states".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidSpec(format!("gamma {} is not in (0,1)", self.gamma)));
        }
        for s in 0..ns {
            if self.absorbing[s] {
                if !self.available[s].is_empty() {
                    return Err(Error::InvalidSpec(format!(
                        "absorbing state `{}` has actions",
                        self.state_names[s]
                    )));
                }
                continue;
            }
            if self.available[s].is_empty() {
                return Err(Error::InvalidSpec(format!("state `{}` has no actions", self.state_names[s])));
            }
            for &a in &self.available[s] {
                let row = &self.transitions[s * na + a];
                let total: f64 = row.iter().map(|&(_, p)| p).sum();
                if row.iter().any(|&(_, p)| p < 0.0) || (total - 1.0).abs() > PROB_TOL {
                    return Err(Error::InvalidSpec(format!(
                        "transition row ({}, {}) sums to {total}",
                        self.state_names[s], self.action_names[a]
                    )));
                }
            }
        }
        let total: f64 = self.initial.iter().sum();
        if self.initial.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidSpec(format!("initial distribution sums to {total}")));
        }
        if let Some(s) = (0..ns).find(|&s| self.absorbing[s] && self.initial[s] > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "absorbing state `{}` has initial mass",
                self.state_names[s]
            )));
        }
        self.reward.validate(self.overlap_c, self.interval_law.max_len())?;
        Ok(())
    }
}

/// Name-based construction of a [`DrmdpSpec`].
#[derive(Debug, Clone, Default)]
pub struct SpecBuilder {
    states: Vec<String>,
    actions: Vec<String>,
    available: Vec<Vec<String>>,
    absorbing: Vec<bool>,
    transitions: Vec<(String, String, String, f64)>,
    initial: Vec<(String, f64)>,
    interval: Vec<(usize, f64)>,
    kind: Option<RewardKind>,
    per_step: Vec<(String, String, f64)>,
    weights: Vec<f64>,
    table: Vec<(String, f64)>,
    gamma: Option<f64>,
    overlap: usize,
}

impl SpecBuilder {
    pub fn state(mut self, name: &str) -> Self {
        self.states.push(name.into());
        self.available.push(Vec::new());
        self.absorbing.push(false);
        self
    }

    pub fn absorbing_state(mut self, name: &str) -> Self {
        self = self.state(name);
        *self.absorbing.last_mut().unwrap() = true;
        self
    }

    /// Register action names without making them available anywhere; fixes id order.
    pub fn declare_actions(mut self, names: &[String]) -> Self {
        for a in names {
            if !self.actions.contains(a) {
                self.actions.push(a.clone());
            }
        }
        self
    }

    /// Make `action` available in `state`; the action name is registered globally on first use.
    pub fn action(mut self, state: &str, action: &str) -> Self {
        if !self.actions.iter().any(|a| a == action) {
            self.actions.push(action.into());
        }
        if let Some(i) = self.states.iter().position(|s| s == state) {
            self.available[i].push(action.into());
        }
        self
    }

    pub fn transition(mut self, from: &str, action: &str, to: &str, p: f64) -> Self {
        self.transitions.push((from.into(), action.into(), to.into(), p));
        self
    }

    pub fn initial(mut self, state: &str, p: f64) -> Self {
        self.initial.push((state.into(), p));
        self
    }

    pub fn interval(mut self, n: usize, p: f64) -> Self {
        self.interval.push((n, p));
        self
    }

    pub fn reward_kind(mut self, kind: RewardKind) -> Self {
        self.kind = Some(kind);
        self
    }

    pub fn step_reward(mut self, state: &str, action: &str, r: f64) -> Self {
        self.per_step.push((state.into(), action.into(), r));
        self
    }

    pub fn weights(mut self, w: Vec<f64>) -> Self {
        self.weights = w;
        self
    }

    /// Tabulated interval reward; `segment` uses the `state.action` token syntax.
    pub fn tabulate(mut self, segment: &str, value: f64) -> Self {
        self.table.push((segment.into(), value));
        self
    }

    pub fn gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn overlap(mut self, c: usize) -> Self {
        self.overlap = c;
        self
    }

    pub fn build(self) -> Result<DrmdpSpec> {
        let ns = self.states.len();
        let na = self.actions.len();
        let sid = |n: &str| {
            self.states
                .iter()
                .position(|s| s == n)
                .ok_or_else(|| Error::UnknownName { kind: "state", name: n.into() })
        };
        let aid = |n: &str| {
            self.actions
                .iter()
                .position(|s| s == n)
                .ok_or_else(|| Error::UnknownName { kind: "action", name: n.into() })
        };
        for (i, name) in self.states.iter().enumerate() {
            if self.states[..i].contains(name) {
                return Err(Error::InvalidSpec(format!("state `{name}` declared twice")));
            }
            check_token(name)?;
        }
        for name in &self.actions {
            check_token(name)?;
        }
        let mut available = vec![Vec::new(); ns];
        for (s, acts) in self.available.iter().enumerate() {
            for a in acts {
                let a = aid(a)?;
                if !available[s].contains(&a) {
                    available[s].push(a);
                }
            }
            available[s].sort_unstable();
        }
        let mut transitions = vec![Vec::new(); ns * na];
        for (from, act, to, p) in &self.transitions {
            let (s, a, t) = (sid(from)?, aid(act)?, sid(to)?);
            if !available[s].contains(&a) {
                return Err(Error::InvalidSpec(format!("action `{act}` is not available in `{from}`")));
            }
            if p > &0.0 {
                let row: &mut Vec<(StateId, f64)> = &mut transitions[s * na + a];
                match row.iter_mut().find(|(x, _)| *x == t) {
                    Some(entry) => entry.1 += p,
                    None => row.push((t, *p)),
                }
            }
        }
        for row in &mut transitions {
            row.sort_by_key(|&(s, _)| s);
        }
        let mut initial = vec![0.0; ns];
        for (s, p) in &self.initial {
            initial[sid(s)?] += p;
        }
        let interval_law = IntervalLaw::new(self.interval.clone())?;
        let mut per_step = PerStepTable::zeros(ns, na);
        for (s, a, r) in &self.per_step {
            let (si, ai) = (sid(s)?, aid(a)?);
            if !available[si].contains(&ai) {
                return Err(Error::InvalidSpec(format!("reward for unavailable action `{a}` in `{s}`")));
            }
            per_step.set(si, ai, *r);
        }
        let kind = self.kind.unwrap_or(RewardKind::Sum);
        let reward = match kind {
            RewardKind::Sum => RewardFunctional::Sum { per_step },
            RewardKind::Max => RewardFunctional::Max { per_step },
            RewardKind::Square => RewardFunctional::Square { per_step },
            RewardKind::WeightedSum => RewardFunctional::WeightedSum { per_step, weights: self.weights.clone() },
            RewardKind::Tabulated => RewardFunctional::Tabulated { table: BTreeMap::new() },
        };
        let mut spec = DrmdpSpec {
            state_names: self.states.clone(),
            action_names: self.actions.clone(),
            available,
            absorbing: self.absorbing.clone(),
            transitions,
            initial,
            interval_law,
            reward,
            gamma: self.gamma.ok_or_else(|| Error::InvalidSpec("gamma not set".into()))?,
            overlap_c: self.overlap,
        };
        if kind == RewardKind::Tabulated {
            let mut table = BTreeMap::new();
            for (seg, v) in &self.table {
                let steps = spec.parse_segment(seg)?;
                if steps.len() <= spec.overlap_c {
                    return Err(Error::InvalidSpec(format!("tabulated segment `{seg}` has no body")));
                }
                table.insert(steps, *v);
            }
            spec.reward = RewardFunctional::Tabulated { table };
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn check_token(name: &str) -> Result<()> {
    if name.is_empty() || name == "_" || name.contains(['.', '|']) || name.contains(char::is_whitespace) {
        return Err(Error::InvalidSpec(format!("`{name}` is not a valid state/action name")));
    }
    Ok(())
}

impl TrajectorySegment {
    /// Check the segment invariants against `spec`.
    pub fn validate(&self, spec: &DrmdpSpec) -> Result<()> {
        if self.prefix_len > spec.overlap() {
            return Err(Error::InvalidInput(format!(
                "prefix of {} steps exceeds overlap {}",
                self.prefix_len,
                spec.overlap()
            )));
        }
        if self.body().is_empty() || self.body().iter().any(|s| s.is_pad()) {
            return Err(Error::InvalidInput("segment body must be nonempty and unpadded".into()));
        }
        let first_real = self.steps.iter().position(|s| !s.is_pad()).unwrap_or(0);
        if self.steps[first_real..].iter().any(|s| s.is_pad()) {
            return Err(Error::InvalidInput("padding must precede all real steps".into()));
        }
        if !spec.is_feasible(&self.steps) {
            return Err(Error::InvalidInput(format!(
                "segment `{}` is infeasible",
                spec.format_segment(&self.steps)
            )));
        }
        Ok(())
    }
}
