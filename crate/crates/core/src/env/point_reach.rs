//! A point on an `L × L` square moving at velocity `a ∈ [−1, 1]²` from a corner towards a
//! target patch on the right edge. The square is cut into ten vertical bands worth `0..=9`.
//! Each interval pays its largest band (taken over pre-move positions) plus `bonus` if the
//! target was reached, minus `bonus` otherwise.

use std::io::Write;

use rand::RngCore;
use serde::Deserialize;

use super::{clip_action, DelayedEnv, Transition};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointReachConfig {
    pub grid_size: f64,
    pub interval: usize,
    pub step_limit: usize,
    pub bonus: f64,
    pub start: [f64; 2],
}

impl Default for PointReachConfig {
    fn default() -> Self {
        Self { grid_size: 20.0, interval: 8, step_limit: 120, bonus: 10.0, start: [0.0, 0.0] }
    }
}

impl PointReachConfig {
    /// 100 × 100 grid, intervals of 20, 500 steps.
    pub fn paper() -> Self {
        Self { grid_size: 100.0, interval: 20, step_limit: 500, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grid_size > 0.0 && self.grid_size.is_finite()) {
            return Err(Error::InvalidConfig("grid_size must be positive".into()));
        }
        if self.interval == 0 || self.step_limit == 0 {
            return Err(Error::InvalidConfig("interval and step_limit must be positive".into()));
        }
        if self.start.iter().any(|&c| !(0.0..=self.grid_size).contains(&c)) {
            return Err(Error::InvalidConfig("start lies outside the grid".into()));
        }
        Ok(())
    }

    pub fn cell(&self) -> f64 {
        self.grid_size / 10.0
    }

    /// `[x_lo, x_hi] × [y_lo, y_hi]`.
    pub fn target_box(&self) -> ([f64; 2], [f64; 2]) {
        let l = self.grid_size;
        ([l - self.cell(), l], [l / 2.0 - self.cell() / 2.0, l / 2.0 + self.cell() / 2.0])
    }

    pub fn target_center(&self) -> [f64; 2] {
        let (x, y) = self.target_box();
        [(x[0] + x[1]) / 2.0, (y[0] + y[1]) / 2.0]
    }

    pub fn in_target(&self, pos: [f64; 2]) -> bool {
        let (x, y) = self.target_box();
        (x[0]..=x[1]).contains(&pos[0]) && (y[0]..=y[1]).contains(&pos[1])
    }

    pub fn band(&self, x: f64) -> usize {
        ((x / self.cell()).floor().max(0.0) as usize).min(9)
    }

    pub fn normalize(&self, pos: [f64; 2]) -> Vec<f64> {
        vec![pos[0] / self.grid_size, pos[1] / self.grid_size]
    }
}

/// `⌈dist(start, target)⌉` at unit speed.
pub fn shortest_path_steps(cfg: &PointReachConfig) -> usize {
    let (x, y) = cfg.target_box();
    let dx = (x[0] - cfg.start[0]).max(cfg.start[0] - x[1]).max(0.0);
    let dy = (y[0] - cfg.start[1]).max(cfg.start[1] - y[1]).max(0.0);
    (dx * dx + dy * dy).sqrt().ceil() as usize
}

#[derive(Debug, Clone)]
pub struct PointReachEnv {
    cfg: PointReachConfig,
    pos: [f64; 2],
    t: usize,
    phase: usize,
    interval_band: usize,
    done: bool,
}

impl PointReachEnv {
    pub fn new(cfg: PointReachConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, pos: cfg.start, t: 0, phase: 0, interval_band: 0, done: true })
    }

    pub fn config(&self) -> &PointReachConfig {
        &self.cfg
    }

    pub fn position(&self) -> [f64; 2] {
        self.pos
    }

    pub fn steps_taken(&self) -> usize {
        self.t
    }

    pub fn start_episode(&mut self) -> Vec<f64> {
        self.pos = self.cfg.start;
        self.t = 0;
        self.phase = 0;
        self.interval_band = 0;
        self.done = false;
        self.cfg.normalize(self.pos)
    }

    pub fn advance(&mut self, action: &[f64]) -> Result<Transition> {
        if self.done {
            return Err(Error::InvalidInput("step on a finished episode".into()));
        }
        if action.len() != 2 {
            return Err(Error::InvalidInput(format!("action has {} components, expected 2", action.len())));
        }
        let (a, clipped) = clip_action(action)?;
        let l = self.cfg.grid_size;
        self.interval_band = if self.phase == 0 {
            self.cfg.band(self.pos[0])
        } else {
            self.interval_band.max(self.cfg.band(self.pos[0]))
        };
        self.pos = [(self.pos[0] + a[0]).clamp(0.0, l), (self.pos[1] + a[1]).clamp(0.0, l)];
        self.t += 1;
        let reached = self.cfg.in_target(self.pos);
        let phase = self.phase;
        let interval_end = reached || phase + 1 == self.cfg.interval || self.t >= self.cfg.step_limit;
        let reward = if interval_end {
            self.interval_band as f64 + self.cfg.bonus * (f64::from(u8::from(reached)) - 1.0)
        } else {
            0.0
        };
        self.phase = if interval_end { 0 } else { phase + 1 };
        self.done = reached || self.t >= self.cfg.step_limit;
        Ok(Transition {
            obs: self.cfg.normalize(self.pos),
            reward,
            phase,
            interval_end,
            terminal: reached,
            done: self.done,
            clipped,
        })
    }
}

impl DelayedEnv for PointReachEnv {
    fn obs_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn max_interval(&self) -> usize {
        self.cfg.interval
    }

    fn overlap(&self) -> usize {
        0
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> Vec<f64> {
        self.start_episode()
    }

    fn step(&mut self, action: &[f64], _rng: &mut dyn RngCore) -> Result<Transition> {
        self.advance(action)
    }
}

/// Point Reach with a dense per-step reward: the band of the pre-move position, plus `bonus`
/// on the step that reaches the target. Meant to be wrapped by a delayed-reward aggregator.
#[derive(Debug, Clone)]
pub struct PointReachDense {
    inner: PointReachEnv,
}

impl PointReachDense {
    pub fn new(cfg: PointReachConfig) -> Result<Self> {
        Ok(Self { inner: PointReachEnv::new(PointReachConfig { interval: 1, ..cfg })? })
    }
}

impl super::DenseEnv for PointReachDense {
    fn obs_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> Vec<f64> {
        self.inner.start_episode()
    }

    fn step(&mut self, action: &[f64], _rng: &mut dyn RngCore) -> Result<super::DenseStep> {
        let band = self.inner.cfg.band(self.inner.pos[0]) as f64;
        let tr = self.inner.advance(action)?;
        let bonus = if tr.terminal { self.inner.cfg.bonus } else { 0.0 };
        Ok(super::DenseStep { obs: tr.obs, reward: band + bonus, terminal: tr.terminal, done: tr.done, clipped: tr.clipped })
    }
}

/// One row of an exported episode.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub x: f64,
    pub y: f64,
    pub a_x: f64,
    pub a_y: f64,
    pub phase: usize,
    pub reward: f64,
    pub done: bool,
}

/// Columns `t,x,y,a_x,a_y,phase,R_t,done`; `(x, y)` is the pre-move position.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x", "y", "a_x", "a_y", "phase", "R_t", "done"])?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.x.to_string(),
            r.y.to_string(),
            r.a_x.to_string(),
            r.a_y.to_string(),
            r.phase.to_string(),
            r.reward.to_string(),
            u8::from(r.done).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
