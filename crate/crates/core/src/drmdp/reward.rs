use std::collections::BTreeMap;

use super::spec::DrmdpSpec;
use super::{ActionId, StateId, Step, TrajectorySegment};
use crate::error::{Error, Result};

/// Dense per-step reward `r̂(s, a)`, indexed `s * num_actions + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerStepTable {
    num_actions: usize,
    values: Vec<f64>,
}

impl PerStepTable {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self { num_actions, values: vec![0.0; num_states * num_actions] }
    }

    pub fn get(&self, s: StateId, a: ActionId) -> f64 {
        self.values[s * self.num_actions + a]
    }

    pub fn set(&mut self, s: StateId, a: ActionId, r: f64) {
        self.values[s * self.num_actions + a] = r;
    }

    pub fn step(&self, step: Step) -> f64 {
        match step {
            Step::Pad => 0.0,
            Step::Act { state, action } => self.get(state, action),
        }
    }

    fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RewardKind {
    Sum,
    Max,
    Square,
    WeightedSum,
    Tabulated,
}

impl RewardKind {
    pub fn name(self) -> &'static str {
        match self {
            RewardKind::Sum => "sum",
            RewardKind::Max => "max",
            RewardKind::Square => "square",
            RewardKind::WeightedSum => "weighted-sum",
            RewardKind::Tabulated => "tabulated",
        }
    }
}

impl std::str::FromStr for RewardKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sum" => RewardKind::Sum,
            "max" => RewardKind::Max,
            "square" => RewardKind::Square,
            "weighted-sum" => RewardKind::WeightedSum,
            "tabulated" => RewardKind::Tabulated,
            other => return Err(Error::UnknownName { kind: "reward kind", name: other.into() }),
        })
    }
}

/// Interval reward `r(τ)` over a full segment (overlap prefix followed by body).
#[derive(Debug, Clone, PartialEq)]
pub enum RewardFunctional {
    /// Sum of `r̂` over the first `body_len` steps of the segment, padding counting as zero.
    /// With `c = 0` this is the plain sum over the body.
    Sum { per_step: PerStepTable },
    /// `10 · max r̂` over the body. Requires `c = 0`.
    Max { per_step: PerStepTable },
    /// `4 · r_avg` when `|r_avg| < 1`, else `4 · sign(r_avg) · r_avg²`, with `r_avg` the
    /// body mean of `r̂`. Requires `c = 0`.
    Square { per_step: PerStepTable },
    /// `Σ_j w_j r̂(step_j)` with weights indexed by position in the segment.
    WeightedSum { per_step: PerStepTable, weights: Vec<f64> },
    /// Arbitrary values keyed by the full step sequence.
    Tabulated { table: BTreeMap<Vec<Step>, f64> },
}

impl RewardFunctional {
    pub fn kind(&self) -> RewardKind {
        match self {
            RewardFunctional::Sum { .. } => RewardKind::Sum,
            RewardFunctional::Max { .. } => RewardKind::Max,
            RewardFunctional::Square { .. } => RewardKind::Square,
            RewardFunctional::WeightedSum { .. } => RewardKind::WeightedSum,
            RewardFunctional::Tabulated { .. } => RewardKind::Tabulated,
        }
    }

    pub fn per_step(&self) -> Option<&PerStepTable> {
        match self {
            RewardFunctional::Sum { per_step }
            | RewardFunctional::Max { per_step }
            | RewardFunctional::Square { per_step }
            | RewardFunctional::WeightedSum { per_step, .. } => Some(per_step),
            RewardFunctional::Tabulated { .. } => None,
        }
    }

    /// Value on `steps` whose first `prefix_len` entries are the overlap prefix.
    /// `None` only for a tabulated functional without an entry.
    pub fn value(&self, steps: &[Step], prefix_len: usize) -> Option<f64> {
        let body = &steps[prefix_len..];
        match self {
            RewardFunctional::Sum { per_step } => {
                Some(steps[..body.len()].iter().map(|&s| per_step.step(s)).sum())
            }
            RewardFunctional::Max { per_step } => {
                Some(10.0 * body.iter().map(|&s| per_step.step(s)).fold(f64::NEG_INFINITY, f64::max))
            }
            RewardFunctional::Square { per_step } => {
                let avg = body.iter().map(|&s| per_step.step(s)).sum::<f64>() / body.len() as f64;
                Some(4.0 * square_shape(avg))
            }
            RewardFunctional::WeightedSum { per_step, weights } => Some(
                steps
                    .iter()
                    .zip(weights)
                    .map(|(&s, &w)| w * per_step.step(s))
                    .sum(),
            ),
            RewardFunctional::Tabulated { table } => table.get(steps).copied(),
        }
    }

    pub(crate) fn magnitude_bound(&self, max_segment: usize) -> f64 {
        match self {
            RewardFunctional::Sum { per_step } => max_segment as f64 * per_step.max_abs(),
            RewardFunctional::Max { per_step } => 10.0 * per_step.max_abs(),
            RewardFunctional::Square { per_step } => {
                let m = per_step.max_abs();
                4.0 * m.max(m * m)
            }
            RewardFunctional::WeightedSum { per_step, weights } => {
                weights.iter().map(|w| w.abs()).sum::<f64>() * per_step.max_abs()
            }
            RewardFunctional::Tabulated { table } => table.values().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    pub(crate) fn validate(&self, c: usize, max_n: usize) -> Result<()> {
        match self {
            RewardFunctional::Max { .. } | RewardFunctional::Square { .. } if c > 0 => Err(
                Error::InvalidSpec(format!("{} reward requires overlap 0", self.kind().name())),
            ),
            RewardFunctional::WeightedSum { weights, .. } => {
                if weights.len() < c + max_n {
                    return Err(Error::InvalidSpec(format!(
                        "{} weights given, segments can hold {}",
                        weights.len(),
                        c + max_n
                    )));
                }
                if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
                    return Err(Error::InvalidSpec("weights must lie in [0,1]".into()));
                }
                Ok(())
            }
            RewardFunctional::Tabulated { table } => {
                match table.keys().find(|k| k.len() > c + max_n || k.len() <= c) {
                    Some(k) => Err(Error::InvalidSpec(format!(
                        "tabulated segment of {} steps does not fit overlap {c} and max length {max_n}",
                        k.len()
                    ))),
                    None => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }
}

/// Odd shaping used by the square functional: identity inside (-1, 1), signed square outside.
pub fn square_shape(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x
    } else {
        x.signum() * x * x
    }
}

impl DrmdpSpec {
    /// `r(τ)` for a segment whose body length lies in the interval-law support.
    pub fn evaluate_reward(&self, segment: &TrajectorySegment) -> Result<f64> {
        let len = segment.body().len();
        if self.interval_law().prob(len) <= 0.0 {
            return Err(Error::UnsupportedLength { len, max: self.interval_law().max_len() });
        }
        self.reward()
            .value(&segment.steps, segment.prefix_len)
            .ok_or_else(|| Error::MissingReward(segment.steps.clone()))
    }

    /// Reward for an interval cut short by absorption; any body length up to the law maximum
    /// is allowed. A tabulated functional without an entry yields `None`.
    pub fn evaluate_truncated(&self, segment: &TrajectorySegment) -> Result<Option<f64>> {
        let len = segment.body().len();
        if len == 0 || len > self.interval_law().max_len() {
            return Err(Error::UnsupportedLength { len, max: self.interval_law().max_len() });
        }
        Ok(self.reward().value(&segment.steps, segment.prefix_len))
    }
}

/// Free-function form of [`DrmdpSpec::evaluate_reward`].
pub fn evaluate_reward(spec: &DrmdpSpec, segment: &TrajectorySegment) -> Result<f64> {
    spec.evaluate_reward(segment)
}
