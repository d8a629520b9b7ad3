//! `𝒬̂(τ ∘ (s_t, a_t)) = H(τ) + C(s_t, phase, a_t)` with target copies, its TD loss and the
//! regularizer tying `H` on completed intervals to their reward.

use ndarray::{Array2, ArrayView2};
use rand::Rng;

use super::features::FeatureLayout;
use super::hstructure::{HKind, HStructure};
use super::mlp::{Mlp, MlpArch};
use super::policy::{policy_gradient, ActionCritic, DeterministicPolicy};
use crate::error::{Error, Result};
use crate::experiment::{ReplayRecord, SegmentStep};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdSettings {
    pub gamma: f64,
    pub overlap: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    /// `td + λ·reg`.
    pub loss: f64,
    pub td: f64,
    pub reg: f64,
    pub grad: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HcCritic {
    pub h: HStructure,
    pub c: Mlp,
    pub lambda: f64,
    pub target_h: HStructure,
    pub target_c: Mlp,
}

impl HcCritic {
    pub fn new<R: Rng + ?Sized>(kind: HKind, layout: FeatureLayout, hidden: &[usize], lambda: f64, rng: &mut R) -> Self {
        let h = HStructure::new(kind, layout, hidden, rng);
        let c = Mlp::new(MlpArch::scalar(layout.step_dim(), hidden), rng);
        Self::from_parts(h, c, lambda)
    }

    pub fn from_parts(h: HStructure, c: Mlp, lambda: f64) -> Self {
        assert!(lambda >= 0.0, "lambda must be nonnegative");
        assert_eq!(c.arch().input, h.layout().step_dim(), "C input width");
        Self { target_h: h.clone(), target_c: c.clone(), h, c, lambda }
    }

    pub fn layout(&self) -> FeatureLayout {
        self.h.layout()
    }

    pub fn num_params(&self) -> usize {
        self.h.num_params() + self.c.num_params()
    }

    /// `H` parameters, then `C`.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut p = self.h.flat_params();
        p.extend_from_slice(self.c.params());
        p
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        let nh = self.h.num_params();
        self.h.set_flat_params(&flat[..nh]);
        self.c.params_mut().copy_from_slice(&flat[nh..]);
    }

    pub fn c_value(&self, step: &SegmentStep) -> f64 {
        self.c.value(&self.layout().step_features(step))
    }

    /// Value of a segment whose last step is the current `(s_t, a_t)`.
    pub fn value(&self, segment: &[SegmentStep]) -> f64 {
        let (last, history) = segment.split_last().expect("nonempty segment");
        self.h.value(history) + self.c_value(last)
    }

    pub fn soft_update_targets(&mut self, tau: f64) -> Result<()> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::InvalidInput(format!("target smoothing {tau} outside (0, 1]")));
        }
        self.h.soft_update_into(&mut self.target_h, tau);
        self.c.soft_update_into(&mut self.target_c, tau);
        Ok(())
    }
}

impl ActionCritic for HcCritic {
    fn action_gradients(&self, batch: &[&ReplayRecord], actions: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let layout = self.layout();
        let x = current_steps(layout, batch, actions);
        let tape = self.c.forward_tape(x.view());
        let mut scratch = vec![0.0; self.c.num_params()];
        let ones = Array2::ones((batch.len(), 1));
        let dx = self.c.backward(&tape, ones.view(), &mut scratch);
        Ok(dx.slice(ndarray::s![.., layout.action_cols()]).to_owned())
    }
}

/// Current-step features with the action column block taken from `actions`.
fn current_steps(layout: FeatureLayout, batch: &[&ReplayRecord], actions: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut x = Array2::zeros((batch.len(), layout.step_dim()));
    for (i, r) in batch.iter().enumerate() {
        let row = x.row_mut(i).into_slice().expect("standard layout");
        let a = actions.row(i);
        layout.write_step(&r.current().obs, r.current().phase, a.as_slice().expect("standard layout"), row);
    }
    x
}

pub(crate) fn steps_matrix(layout: FeatureLayout, steps: &[SegmentStep]) -> Array2<f64> {
    let mut x = Array2::zeros((steps.len(), layout.step_dim()));
    for (mut row, s) in x.rows_mut().into_iter().zip(steps) {
        layout.write_step(&s.obs, s.phase, &s.action, row.as_slice_mut().expect("standard layout"));
    }
    x
}

/// Successor steps `(s', phase', π(s', phase'))` for the non-terminal records.
pub(crate) fn successor_steps(
    batch: &[&ReplayRecord],
    policy: &DeterministicPolicy,
) -> (Vec<usize>, Vec<SegmentStep>) {
    let live: Vec<usize> = (0..batch.len()).filter(|&i| !batch[i].terminal).collect();
    if live.is_empty() {
        return (live, Vec::new());
    }
    let states = policy.states_matrix(live.iter().map(|&i| (batch[i].next_obs.as_slice(), batch[i].next_phase())));
    let actions = policy.net().forward_batch(states.view());
    let steps = live
        .iter()
        .zip(actions.rows())
        .map(|(&i, a)| SegmentStep { obs: batch[i].next_obs.clone(), action: a.to_vec(), phase: batch[i].next_phase() })
        .collect();
    (live, steps)
}

fn check_batch(batch: &[&ReplayRecord], overlap: usize) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    batch.iter().try_for_each(|r| r.validate(overlap))
}

/// `mean (R + γ(Ĥ(next history) + Ĉ(s', a')) − H − C)² + λ·L_reg`, gradient over live
/// `H` then `C` parameters. `a'` comes from `policy`; terminal successors have target `R`.
pub fn hc_td_loss(
    critic: &HcCritic,
    batch: &[&ReplayRecord],
    policy: &DeterministicPolicy,
    settings: TdSettings,
) -> Result<LossOutput> {
    check_batch(batch, settings.overlap)?;
    let layout = critic.layout();
    let b = batch.len();
    let (live, next_steps) = successor_steps(batch, policy);
    let mut targets: Vec<f64> = batch.iter().map(|r| r.reward).collect();
    if !live.is_empty() {
        let hist: Vec<&[SegmentStep]> = live.iter().map(|&i| batch[i].next_history(settings.overlap)).collect();
        let h_next = critic.target_h.forward_batch(&hist).values;
        let x = steps_matrix(layout, &next_steps);
        let c_next = critic.target_c.forward_batch(x.view());
        for (r, &i) in live.iter().enumerate() {
            targets[i] += settings.gamma * (h_next[r] + c_next[[r, 0]]);
        }
    }

    let hist: Vec<&[SegmentStep]> = batch.iter().map(|r| r.history()).collect();
    let h_eval = critic.h.forward_batch(&hist);
    let cur_actions = Array2::from_shape_fn((b, layout.action_dim), |(i, k)| batch[i].current().action[k]);
    let x = current_steps(layout, batch, cur_actions.view());
    let c_tape = critic.c.forward_tape(x.view());
    let mut coef = vec![0.0; b];
    let mut td = 0.0;
    for i in 0..b {
        let delta = h_eval.values[i] + c_tape.output()[[i, 0]] - targets[i];
        td += delta * delta;
        coef[i] = 2.0 * delta / b as f64;
    }
    td /= b as f64;

    let nh = critic.h.num_params();
    let mut grad = vec![0.0; critic.num_params()];
    critic.h.backward_batch(&h_eval, &coef, &mut grad[..nh]);
    let dy = Array2::from_shape_vec((b, 1), coef).expect("column");
    critic.c.backward(&c_tape, dy.view(), &mut grad[nh..]);

    let intervals: Vec<(&[SegmentStep], f64)> =
        batch.iter().filter(|r| r.interval_end).map(|r| (r.segment.as_slice(), r.reward)).collect();
    let mut reg = 0.0;
    if !intervals.is_empty() {
        let (value, g) = reg_loss(&critic.h, &intervals);
        reg = value;
        if critic.lambda > 0.0 {
            for (acc, v) in grad[..nh].iter_mut().zip(g) {
                *acc += critic.lambda * v;
            }
        }
    }
    Ok(LossOutput { loss: td + critic.lambda * reg, td, reg, grad })
}

/// `mean (H(τ_i) − r(τ_i))²` over completed intervals, with its gradient over `H`.
pub fn reg_loss(h: &HStructure, intervals: &[(&[SegmentStep], f64)]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; h.num_params()];
    if intervals.is_empty() {
        return (0.0, grad);
    }
    let m = intervals.len() as f64;
    let segs: Vec<&[SegmentStep]> = intervals.iter().map(|(s, _)| *s).collect();
    let eval = h.forward_batch(&segs);
    let mut loss = 0.0;
    let coef: Vec<f64> = intervals
        .iter()
        .zip(&eval.values)
        .map(|((_, r), v)| {
            let e = v - r;
            loss += e * e;
            2.0 * e / m
        })
        .collect();
    h.backward_batch(&eval, &coef, &mut grad);
    (loss / m, grad)
}

/// Policy gradient through `C` only.
pub fn hc_policy_gradient(critic: &HcCritic, batch: &[&ReplayRecord], policy: &DeterministicPolicy) -> Result<Vec<f64>> {
    policy_gradient(critic, batch, policy)
}
