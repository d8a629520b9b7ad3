use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};

/// One executed step: raw observation, action taken, phase `t − t_i` inside its interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentStep {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub phase: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayRecord {
    /// `τ_{t_i−c:t+1}`: up to `c` overlap steps, then the interval body ending in `(s_t, a_t)`.
    pub segment: Vec<SegmentStep>,
    pub prefix_len: usize,
    /// `R_t`; nonzero only when `interval_end`.
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub interval_end: bool,
    /// Successor is absorbing: no bootstrap.
    pub terminal: bool,
    pub behavior_id: u64,
    pub episode: u64,
    pub step: usize,
}

impl ReplayRecord {
    pub fn phase(&self) -> usize {
        self.segment.len() - self.prefix_len - 1
    }

    pub fn current(&self) -> &SegmentStep {
        self.segment.last().expect("nonempty segment")
    }

    pub fn history(&self) -> &[SegmentStep] {
        &self.segment[..self.segment.len() - 1]
    }

    pub fn next_phase(&self) -> usize {
        if self.interval_end {
            0
        } else {
            self.phase() + 1
        }
    }

    /// History the successor step is appended to: the whole segment inside an interval,
    /// its last `overlap` steps after a reset.
    pub fn next_history(&self, overlap: usize) -> &[SegmentStep] {
        if self.interval_end {
            &self.segment[self.segment.len().saturating_sub(overlap)..]
        } else {
            &self.segment
        }
    }

    pub fn validate(&self, overlap: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("replay record {}/{}: {m}", self.episode, self.step)));
        if self.segment.is_empty() || self.prefix_len >= self.segment.len() {
            return bad("segment has no body");
        }
        if self.prefix_len > overlap {
            return bad("prefix longer than the overlap");
        }
        for (k, s) in self.segment[self.prefix_len..].iter().enumerate() {
            if s.phase != k {
                return bad("body phases are not 0, 1, ...");
            }
        }
        if !self.interval_end && self.reward != 0.0 {
            return bad("reward outside an interval end");
        }
        if self.terminal && !self.interval_end {
            return bad("terminal step must close its interval");
        }
        Ok(())
    }
}

/// FIFO buffer with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    records: VecDeque<ReplayRecord>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("buffer capacity must be positive".into()));
        }
        Ok(Self { capacity, records: VecDeque::with_capacity(capacity.min(1 << 16)) })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: ReplayRecord) {
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(record);
    }

    pub fn get(&self, i: usize) -> Option<&ReplayRecord> {
        self.records.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ReplayRecord> {
        self.records.iter()
    }

    /// Uniform with replacement.
    pub fn sample<'a, R: Rng + ?Sized>(&'a self, rng: &mut R, size: usize) -> Vec<&'a ReplayRecord> {
        if self.records.is_empty() {
            return Vec::new();
        }
        (0..size).map(|_| &self.records[rng.random_range(0..self.records.len())]).collect()
    }
}
