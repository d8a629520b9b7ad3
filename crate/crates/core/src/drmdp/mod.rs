//! Delayed-reward MDP model: specs, interval laws, reward functionals, policies and
//! episode sampling.

mod feasible;
mod format;
mod pi_check;
mod policy;
pub mod random;
mod reward;
mod spec;
mod trace;

pub use feasible::{feasible_segments, Closure, FeasibleSegments};
pub use format::{spec_from_text, spec_to_text};
pub use pi_check::{check_pi_condition, check_strong_pi_condition, PiReport, PiWitness};
pub use policy::{Policy, PolicyS, PolicyTau};
pub use reward::{evaluate_reward, square_shape, PerStepTable, RewardFunctional, RewardKind};
pub use spec::{DrmdpSpec, IntervalLaw, SpecBuilder, PROB_TOL};
pub use trace::{discounted_return, sample_episode, EpisodeTrace, IntervalRecord};

pub type StateId = usize;
pub type ActionId = usize;

/// One step of a trajectory. `Pad` fills the overlap prefix before the episode starts
/// and orders before every real step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Step {
    Pad,
    Act { state: StateId, action: ActionId },
}

impl Step {
    pub fn new(state: StateId, action: ActionId) -> Self {
        Step::Act { state, action }
    }

    pub fn is_pad(self) -> bool {
        matches!(self, Step::Pad)
    }

    pub fn state(self) -> Option<StateId> {
        match self {
            Step::Pad => None,
            Step::Act { state, .. } => Some(state),
        }
    }

    pub fn action(self) -> Option<ActionId> {
        match self {
            Step::Pad => None,
            Step::Act { action, .. } => Some(action),
        }
    }
}

/// Overlap prefix of `prefix_len` steps followed by a nonempty body within one interval.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrajectorySegment {
    pub steps: Vec<Step>,
    pub prefix_len: usize,
}

impl TrajectorySegment {
    pub fn new(steps: Vec<Step>, prefix_len: usize) -> Self {
        debug_assert!(prefix_len <= steps.len());
        Self { steps, prefix_len }
    }

    pub fn prefix(&self) -> &[Step] {
        &self.steps[..self.prefix_len]
    }

    pub fn body(&self) -> &[Step] {
        &self.steps[self.prefix_len..]
    }

    /// Zero-based phase of the last step inside its interval.
    pub fn phase(&self) -> usize {
        self.body().len().saturating_sub(1)
    }

    pub fn last(&self) -> Option<Step> {
        self.steps.last().copied()
    }
}
