//! Single network over the whole segment, the comparison arm for gradient variance.
//!
//! Input: `slots` blocks of `step_dim + 1` values. Block 0 is the current step, then the
//! history most recent first; unused blocks are zero with mask 0.

use ndarray::{s, Array2, ArrayView2};
use rand::Rng;

use super::critic::{successor_steps, LossOutput, TdSettings};
use super::features::FeatureLayout;
use super::mlp::{Mlp, MlpArch};
use super::policy::{ActionCritic, DeterministicPolicy};
use crate::error::{Error, Result};
use crate::experiment::{ReplayRecord, SegmentStep};

#[derive(Debug, Clone, PartialEq)]
pub struct MonolithicCritic {
    layout: FeatureLayout,
    slots: usize,
    pub net: Mlp,
    pub target: Mlp,
}

impl MonolithicCritic {
    /// `slots` is the longest segment accepted: max interval length plus overlap.
    pub fn new<R: Rng + ?Sized>(layout: FeatureLayout, slots: usize, hidden: &[usize], rng: &mut R) -> Self {
        let net = Mlp::new(MlpArch::scalar(slots * (layout.step_dim() + 1), hidden), rng);
        Self { layout, slots, target: net.clone(), net }
    }

    pub fn from_net(layout: FeatureLayout, slots: usize, net: Mlp) -> Result<Self> {
        if net.arch().input != slots * (layout.step_dim() + 1) || net.arch().output != 1 {
            return Err(Error::InvalidInput("monolithic net does not match the slot layout".into()));
        }
        Ok(Self { layout, slots, target: net.clone(), net })
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn layout(&self) -> FeatureLayout {
        self.layout
    }

    fn block(&self) -> usize {
        self.layout.step_dim() + 1
    }

    /// Encodes `history ∘ current`.
    pub fn encode(&self, history: &[SegmentStep], current: &SegmentStep, out: &mut [f64]) -> Result<()> {
        if history.len() + 1 > self.slots {
            return Err(Error::InvalidInput(format!(
                "segment of {} steps exceeds {} slots",
                history.len() + 1,
                self.slots
            )));
        }
        out.fill(0.0);
        let d = self.layout.step_dim();
        let blk = self.block();
        for (k, step) in std::iter::once(current).chain(history.iter().rev()).enumerate() {
            let slot = &mut out[k * blk..(k + 1) * blk];
            self.layout.write_step(&step.obs, step.phase, &step.action, &mut slot[..d]);
            slot[d] = 1.0;
        }
        Ok(())
    }

    fn encode_batch<'a>(
        &self,
        items: impl ExactSizeIterator<Item = (&'a [SegmentStep], &'a SegmentStep)>,
    ) -> Result<Array2<f64>> {
        let mut x = Array2::zeros((items.len(), self.net.arch().input));
        for (mut row, (hist, cur)) in x.rows_mut().into_iter().zip(items) {
            self.encode(hist, cur, row.as_slice_mut().expect("standard layout"))?;
        }
        Ok(x)
    }

    pub fn value(&self, segment: &[SegmentStep]) -> Result<f64> {
        let (last, history) = segment.split_last().expect("nonempty segment");
        let mut x = vec![0.0; self.net.arch().input];
        self.encode(history, last, &mut x)?;
        Ok(self.net.value(&x))
    }

    pub fn soft_update_targets(&mut self, tau: f64) -> Result<()> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::InvalidInput(format!("target smoothing {tau} outside (0, 1]")));
        }
        self.net.soft_update_into(&mut self.target, tau);
        Ok(())
    }
}

impl ActionCritic for MonolithicCritic {
    fn action_gradients(&self, batch: &[&ReplayRecord], actions: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let current: Vec<SegmentStep> = batch
            .iter()
            .zip(actions.rows())
            .map(|(r, a)| SegmentStep { action: a.to_vec(), ..r.current().clone() })
            .collect();
        let x = self.encode_batch(batch.iter().zip(&current).map(|(r, c)| (r.history(), c)))?;
        let tape = self.net.forward_tape(x.view());
        let mut scratch = vec![0.0; self.net.num_params()];
        let ones = Array2::ones((batch.len(), 1));
        let dx = self.net.backward(&tape, ones.view(), &mut scratch);
        Ok(dx.slice(s![.., self.layout.action_cols()]).to_owned())
    }
}

/// `mean (R + γ M̄(next history ∘ (s', a')) − M(τ))²` with its gradient over the live net.
pub fn monolithic_td_loss(
    critic: &MonolithicCritic,
    batch: &[&ReplayRecord],
    policy: &DeterministicPolicy,
    settings: TdSettings,
) -> Result<LossOutput> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    for r in batch {
        r.validate(settings.overlap)?;
    }
    let b = batch.len();
    let (live, next_steps) = successor_steps(batch, policy);
    let mut targets: Vec<f64> = batch.iter().map(|r| r.reward).collect();
    if !live.is_empty() {
        let x = critic.encode_batch(
            live.iter().zip(&next_steps).map(|(&i, s)| (batch[i].next_history(settings.overlap), s)),
        )?;
        let next = critic.target.forward_batch(x.view());
        for (r, &i) in live.iter().enumerate() {
            targets[i] += settings.gamma * next[[r, 0]];
        }
    }
    let x = critic.encode_batch(batch.iter().map(|r| (r.history(), r.current())))?;
    let tape = critic.net.forward_tape(x.view());
    let mut td = 0.0;
    let dy = Array2::from_shape_fn((b, 1), |(i, _)| {
        let delta = tape.output()[[i, 0]] - targets[i];
        td += delta * delta;
        2.0 * delta / b as f64
    });
    let mut grad = vec![0.0; critic.net.num_params()];
    critic.net.backward(&tape, dy.view(), &mut grad);
    td /= b as f64;
    Ok(LossOutput { loss: td, td, reg: 0.0, grad })
}

/// Policy gradient through the full-segment critic.
pub fn monolithic_trajectory_gradient(
    critic: &MonolithicCritic,
    batch: &[&ReplayRecord],
    policy: &DeterministicPolicy,
) -> Result<Vec<f64>> {
    super::policy::policy_gradient(critic, batch, policy)
}
