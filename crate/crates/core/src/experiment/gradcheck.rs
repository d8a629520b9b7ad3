//! Central finite differences against the hand-written gradients.

use rand::Rng;

use super::replay::{ReplayRecord, SegmentStep};
use crate::approx::FeatureLayout;

pub const FD_STEP: f64 = 1e-6;

/// Central-difference gradient of `f` at `x`.
pub fn numeric_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + FD_STEP;
            let up = f(&probe);
            probe[i] = x[i] - FD_STEP;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// `‖a − n‖ / max(‖a‖, ‖n‖)`, 0 when both vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, b)| a - b).collect();
    let scale = norm(analytic).max(norm(numeric));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

fn random_step<R: Rng + ?Sized>(rng: &mut R, layout: FeatureLayout, phase: usize) -> SegmentStep {
    SegmentStep {
        obs: (0..layout.obs_dim).map(|_| rng.random_range(0.0..1.0)).collect(),
        action: (0..layout.action_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        phase,
    }
}

/// Random well-formed records with interval lengths up to `layout.max_phase`.
pub fn synthetic_records<R: Rng + ?Sized>(
    rng: &mut R,
    layout: FeatureLayout,
    overlap: usize,
    count: usize,
) -> Vec<ReplayRecord> {
    (0..count)
        .map(|i| {
            let prefix_len = rng.random_range(0..=overlap);
            let phase = rng.random_range(0..layout.max_phase);
            let mut segment: Vec<SegmentStep> = (0..prefix_len)
                .map(|k| random_step(rng, layout, layout.max_phase - prefix_len + k))
                .collect();
            segment.extend((0..=phase).map(|k| random_step(rng, layout, k)));
            let interval_end = phase + 1 == layout.max_phase || rng.random_bool(0.3);
            let terminal = interval_end && rng.random_bool(0.2);
            ReplayRecord {
                segment,
                prefix_len,
                reward: if interval_end { rng.random_range(-2.0..2.0) } else { 0.0 },
                next_obs: (0..layout.obs_dim).map(|_| rng.random_range(0.0..1.0)).collect(),
                interval_end,
                terminal,
                behavior_id: 0,
                episode: i as u64,
                step: phase,
            }
        })
        .collect()
}
