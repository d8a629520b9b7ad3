//! Continuous environments emitting delayed interval rewards.

mod heatmap;
mod point_reach;
mod wrapper;

use rand::RngCore;

use crate::error::Result;

pub use heatmap::{export_heatmap, line_cell_mask, write_heatmap_csv, HEATMAP_CELLS};
pub use point_reach::{
    shortest_path_steps, write_trace_csv, PointReachConfig, PointReachDense, PointReachEnv, TraceRow,
};
pub use wrapper::{wrap_delayed, Aggregation, DelayedRewardWrapper, DenseEnv, DenseStep};

/// Outcome of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Approximator-facing observation of the successor.
    pub obs: Vec<f64>,
    /// `R_t`: the interval reward at an interval end, 0 otherwise.
    pub reward: f64,
    /// Phase of the step just taken.
    pub phase: usize,
    pub interval_end: bool,
    /// Successor is absorbing.
    pub terminal: bool,
    /// Episode over (absorbed or step limit).
    pub done: bool,
    /// Some action component was outside `[−1, 1]` and got clipped.
    pub clipped: bool,
}

pub trait DelayedEnv {
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Largest interval length.
    fn max_interval(&self) -> usize;
    /// Steps of the previous interval the reward may depend on.
    fn overlap(&self) -> usize;
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;
    fn step(&mut self, action: &[f64], rng: &mut dyn RngCore) -> Result<Transition>;
}

/// Clips every component to `[−1, 1]`; reports whether anything changed.
pub(crate) fn clip_action(action: &[f64]) -> Result<(Vec<f64>, bool)> {
    if action.iter().any(|a| a.is_nan()) {
        return Err(crate::Error::InvalidInput("action has a NaN component".into()));
    }
    let clipped: Vec<f64> = action.iter().map(|a| a.clamp(-1.0, 1.0)).collect();
    let changed = clipped != action;
    Ok((clipped, changed))
}
