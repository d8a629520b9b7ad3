use rand::RngCore;

use super::{DelayedEnv, Transition};
use crate::drmdp::{square_shape, IntervalLaw};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseStep {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
    pub done: bool,
    pub clipped: bool,
}

/// Environment with an ordinary per-step reward `r̂(s, a)`.
pub trait DenseEnv {
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;
    fn step(&mut self, action: &[f64], rng: &mut dyn RngCore) -> Result<DenseStep>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// `Σ r̂` over `[t_i − c, t_i + n_i − c)`; an interval cut short by the episode end
    /// counts as having the length it reached.
    Sum,
    /// `10 · max r̂` over the interval.
    Max,
    /// `4 · square_shape(mean r̂)` over the interval.
    Square,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Self::Sum),
            "max" => Ok(Self::Max),
            "square" => Ok(Self::Square),
            _ => Err(Error::UnknownName { kind: "aggregation", name: s.into() }),
        }
    }
}

/// Holds per-step rewards back and pays them per interval.
#[derive(Debug, Clone)]
pub struct DelayedRewardWrapper<E> {
    inner: E,
    kind: Aggregation,
    law: IntervalLaw,
    overlap: usize,
    /// `r̂` of every step of the current episode.
    rewards: Vec<f64>,
    interval_start: usize,
    interval_len: usize,
    dropped_steps: usize,
    dropped_reward: f64,
}

pub fn wrap_delayed<E: DenseEnv>(inner: E, kind: Aggregation, law: IntervalLaw, overlap: usize) -> Result<DelayedRewardWrapper<E>> {
    if overlap > 0 && kind != Aggregation::Sum {
        return Err(Error::InvalidConfig("overlap is only defined for the sum aggregation".into()));
    }
    Ok(DelayedRewardWrapper {
        inner,
        kind,
        law,
        overlap,
        rewards: Vec::new(),
        interval_start: 0,
        interval_len: 0,
        dropped_steps: 0,
        dropped_reward: 0.0,
    })
}

impl<E> DelayedRewardWrapper<E> {
    pub fn inner(&self) -> &E {
        &self.inner
    }

    /// Per-step rewards never paid because the episode ended inside the overlap tail,
    /// accumulated over all episodes: `(count, sum)`.
    pub fn dropped_tail(&self) -> (usize, f64) {
        (self.dropped_steps, self.dropped_reward)
    }

    fn interval_reward(&self, end: usize) -> f64 {
        let body = &self.rewards[self.interval_start..end];
        match self.kind {
            Aggregation::Sum => {
                let lo = self.interval_start.saturating_sub(self.overlap);
                let hi = end.saturating_sub(self.overlap);
                self.rewards[lo..hi.max(lo)].iter().sum()
            }
            Aggregation::Max => 10.0 * body.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Aggregation::Square => 4.0 * square_shape(body.iter().sum::<f64>() / body.len() as f64),
        }
    }
}

impl<E: DenseEnv> DelayedEnv for DelayedRewardWrapper<E> {
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    fn action_dim(&self) -> usize {
        self.inner.action_dim()
    }

    fn max_interval(&self) -> usize {
        self.law.max_len()
    }

    fn overlap(&self) -> usize {
        self.overlap
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.rewards.clear();
        self.interval_start = 0;
        self.interval_len = self.law.sample(rng);
        self.inner.reset(rng)
    }

    fn step(&mut self, action: &[f64], rng: &mut dyn RngCore) -> Result<Transition> {
        let out = self.inner.step(action, rng)?;
        self.rewards.push(out.reward);
        let end = self.rewards.len();
        let phase = end - 1 - self.interval_start;
        let interval_end = out.done || phase + 1 == self.interval_len;
        let mut reward = 0.0;
        if interval_end {
            reward = self.interval_reward(end);
            if out.done && self.kind == Aggregation::Sum {
                let unpaid = &self.rewards[end.saturating_sub(self.overlap)..];
                self.dropped_steps += unpaid.len();
                self.dropped_reward += unpaid.iter().sum::<f64>();
            }
            self.interval_start = end;
            self.interval_len = self.law.sample(rng);
        }
        Ok(Transition {
            obs: out.obs,
            reward,
            phase,
            interval_end,
            terminal: out.terminal,
            done: out.done,
            clipped: out.clipped,
        })
    }
}
