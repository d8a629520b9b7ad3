use super::policy::{policy_gradient, ActionCritic, DeterministicPolicy};
use crate::error::{Error, Result};
use crate::experiment::ReplayRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientVariance {
    pub hc_variance: f64,
    pub monolithic_variance: f64,
}

/// Sum over coordinates of the unbiased sample variance (divisor `m − 1`).
pub fn summed_sample_variance(samples: &[Vec<f64>]) -> Result<f64> {
    let m = samples.len();
    if m < 2 {
        return Err(Error::InvalidInput("need at least two samples".into()));
    }
    let d = samples[0].len();
    if samples.iter().any(|s| s.len() != d) {
        return Err(Error::InvalidInput("samples have different lengths".into()));
    }
    let mut total = 0.0;
    for k in 0..d {
        let mean = samples.iter().map(|s| s[k]).sum::<f64>() / m as f64;
        total += samples.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    }
    Ok(total)
}

/// Per-sample policy gradients restricted to the policy's output layer, one record at a time.
pub fn final_layer_gradients(
    critic: &dyn ActionCritic,
    batch: &[&ReplayRecord],
    policy: &DeterministicPolicy,
) -> Result<Vec<Vec<f64>>> {
    let range = policy.net().final_layer_range();
    batch
        .iter()
        .map(|r| policy_gradient(critic, std::slice::from_ref(r), policy).map(|g| g[range.clone()].to_vec()))
        .collect()
}

/// Summed final-layer gradient variance for both critics on the same batch and policy.
pub fn estimate_gradient_variance(
    hc: &dyn ActionCritic,
    monolithic: &dyn ActionCritic,
    batch: &[&ReplayRecord],
    policy: &DeterministicPolicy,
) -> Result<GradientVariance> {
    if batch.len() < 2 {
        return Err(Error::InvalidInput("variance probe needs a batch of at least two".into()));
    }
    Ok(GradientVariance {
        hc_variance: summed_sample_variance(&final_layer_gradients(hc, batch, policy)?)?,
        monolithic_variance: summed_sample_variance(&final_layer_gradients(monolithic, batch, policy)?)?,
    })
}
