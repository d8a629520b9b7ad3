use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::policy::Policy;
use super::spec::DrmdpSpec;
use super::{Step, TrajectorySegment};
use crate::error::{Error, Result};

/// One closed interval of a sampled episode.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRecord {
    pub segment: TrajectorySegment,
    /// Episode step index of the interval's last step, where the reward is revealed.
    pub end_step: usize,
    pub reward: f64,
    /// Closed early by absorption.
    pub truncated: bool,
    /// False when a truncated tabulated segment had no entry and was paid 0.
    pub reward_defined: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeTrace {
    pub intervals: Vec<IntervalRecord>,
    pub steps: usize,
    /// Reached an absorbing state; otherwise the horizon cut the episode and the open
    /// interval was dropped unpaid.
    pub terminated: bool,
}

impl EpisodeTrace {
    pub fn undefined_rewards(&self) -> usize {
        self.intervals.iter().filter(|i| !i.reward_defined).count()
    }
}

/// `Σ_i γ^{end_i} r_i`.
pub fn discounted_return(trace: &EpisodeTrace, gamma: f64) -> f64 {
    trace
        .intervals
        .iter()
        .map(|i| gamma.powi(i.end_step as i32) * i.reward)
        .sum()
}

fn draw<R: Rng>(rng: &mut R, probs: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = None;
    for (i, p) in probs {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = Some(i);
        if u < acc {
            return Some(i);
        }
    }
    last
}

/// Sample one episode of at most `horizon` steps.
pub fn sample_episode(spec: &DrmdpSpec, policy: &dyn Policy, seed: u64, horizon: usize) -> Result<EpisodeTrace> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = spec.overlap();
    let mut state = draw(&mut rng, spec.initial().iter().copied().enumerate())
        .ok_or_else(|| Error::InvalidSpec("empty initial distribution".into()))?;
    let mut seg = spec.start_prefix();
    let mut prefix_len = c;
    let mut target = spec.interval_law().sample(&mut rng);
    let mut trace = EpisodeTrace::default();
    for t in 0..horizon {
        let phase = seg.len() - prefix_len;
        let probs = policy
            .action_probs(&seg, state, phase)
            .ok_or_else(|| Error::MissingPolicyRow { history: seg.clone(), state })?;
        let action = draw(&mut rng, probs.iter().copied().enumerate())
            .ok_or_else(|| Error::InvalidPolicy("empty action distribution".into()))?;
        seg.push(Step::new(state, action));
        let next = draw(&mut rng, spec.transition(state, action).iter().copied())
            .ok_or_else(|| Error::InvalidSpec("empty transition row".into()))?;
        trace.steps = t + 1;
        let absorbed = spec.is_absorbing(next);
        let full = seg.len() - prefix_len == target;
        if absorbed || full {
            let segment = TrajectorySegment::new(seg.clone(), prefix_len);
            let (reward, reward_defined) = if full {
                (spec.evaluate_reward(&segment)?, true)
            } else {
                match spec.evaluate_truncated(&segment)? {
                    Some(r) => (r, true),
                    None => (0.0, false),
                }
            };
            trace.intervals.push(IntervalRecord { segment, end_step: t, reward, truncated: !full, reward_defined });
            if absorbed {
                trace.terminated = true;
                return Ok(trace);
            }
            seg = seg[seg.len() - c..].to_vec();
            prefix_len = c;
            target = spec.interval_law().sample(&mut rng);
        }
        state = next;
    }
    Ok(trace)
}
