use ndarray::{Array2, ArrayView2};
use rand::Rng;

use super::features::FeatureLayout;
use super::mlp::{Mlp, MlpArch, OutputActivation, Tape};
use crate::error::{Error, Result};
use crate::experiment::ReplayRecord;

/// `a = tanh(net(obs, phase / max_phase))`, one output per action component.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicPolicy {
    layout: FeatureLayout,
    net: Mlp,
}

impl DeterministicPolicy {
    pub fn new<R: Rng + ?Sized>(layout: FeatureLayout, hidden: &[usize], rng: &mut R) -> Self {
        let arch = MlpArch::new(layout.state_dim(), hidden, layout.action_dim, OutputActivation::Tanh);
        Self { layout, net: Mlp::new(arch, rng) }
    }

    pub fn from_net(layout: FeatureLayout, net: Mlp) -> Result<Self> {
        if net.arch().input != layout.state_dim() || net.arch().output != layout.action_dim {
            return Err(Error::InvalidInput("policy net does not match the feature layout".into()));
        }
        Ok(Self { layout, net })
    }

    pub fn layout(&self) -> FeatureLayout {
        self.layout
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn act(&self, obs: &[f64], phase: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.layout.state_dim()];
        self.layout.write_state(obs, phase, &mut x);
        self.net.forward(&x)
    }

    pub fn states_matrix<'a>(&self, states: impl ExactSizeIterator<Item = (&'a [f64], usize)>) -> Array2<f64> {
        let mut x = Array2::zeros((states.len(), self.layout.state_dim()));
        for (mut row, (obs, phase)) in x.rows_mut().into_iter().zip(states) {
            self.layout.write_state(obs, phase, row.as_slice_mut().expect("standard layout"));
        }
        x
    }

    pub fn act_batch(&self, states: ArrayView2<'_, f64>) -> Tape {
        self.net.forward_tape(states)
    }

    /// Current-step states of a batch of records.
    pub fn record_states(&self, batch: &[&ReplayRecord]) -> Array2<f64> {
        self.states_matrix(batch.iter().map(|r| (r.current().obs.as_slice(), r.current().phase)))
    }

    /// `Σ_i da_i · ∂π(s_i)/∂θ`.
    pub fn chain(&self, tape: &Tape, da: ArrayView2<'_, f64>) -> Vec<f64> {
        let mut grad = vec![0.0; self.net.num_params()];
        self.net.backward(tape, da, &mut grad);
        grad
    }
}

/// A critic that can be differentiated with respect to the last action of a segment.
pub trait ActionCritic {
    /// Row `i`: `∂Q/∂a_t` for record `i` with its last action replaced by `actions[i]`.
    fn action_gradients(&self, batch: &[&ReplayRecord], actions: ArrayView2<'_, f64>) -> Result<Array2<f64>>;
}

/// Deterministic policy gradient `mean_i ∇_a Q|_{a=π(s_i)} ∇_θ π(s_i)`, an ascent direction.
pub fn policy_gradient(critic: &dyn ActionCritic, batch: &[&ReplayRecord], policy: &DeterministicPolicy) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let tape = policy.act_batch(policy.record_states(batch).view());
    let mut da = critic.action_gradients(batch, tape.output().view())?;
    da /= batch.len() as f64;
    Ok(policy.chain(&tape, da.view()))
}
