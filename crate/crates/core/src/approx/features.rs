use std::ops::Range;

use crate::experiment::SegmentStep;

/// Step featurization: `obs ++ [phase / max_phase] ++ action`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureLayout {
    pub obs_dim: usize,
    pub action_dim: usize,
    /// Largest interval length in the support of `q_n`.
    pub max_phase: usize,
}

impl FeatureLayout {
    pub fn new(obs_dim: usize, action_dim: usize, max_phase: usize) -> Self {
        assert!(max_phase > 0, "max_phase must be positive");
        Self { obs_dim, action_dim, max_phase }
    }

    pub fn step_dim(&self) -> usize {
        self.obs_dim + 1 + self.action_dim
    }

    pub fn state_dim(&self) -> usize {
        self.obs_dim + 1
    }

    pub fn action_cols(&self) -> Range<usize> {
        self.obs_dim + 1..self.step_dim()
    }

    pub fn norm_phase(&self, phase: usize) -> f64 {
        phase as f64 / self.max_phase as f64
    }

    pub fn write_state(&self, obs: &[f64], phase: usize, out: &mut [f64]) {
        debug_assert_eq!(obs.len(), self.obs_dim);
        out[..self.obs_dim].copy_from_slice(obs);
        out[self.obs_dim] = self.norm_phase(phase);
    }

    pub fn write_step(&self, obs: &[f64], phase: usize, action: &[f64], out: &mut [f64]) {
        debug_assert_eq!(action.len(), self.action_dim);
        self.write_state(obs, phase, out);
        out[self.obs_dim + 1..self.step_dim()].copy_from_slice(action);
    }

    pub fn step_features(&self, step: &SegmentStep) -> Vec<f64> {
        let mut out = vec![0.0; self.step_dim()];
        self.write_step(&step.obs, step.phase, &step.action, &mut out);
        out
    }
}
