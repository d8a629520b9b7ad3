//! Random small specs for property tests and the verification suite.
//!
//! Layered specs place every non-terminal state in a layer and only allow moves to the next
//! layer, so every path is absorbed after exactly `layers` steps and the step index is a
//! function of the state. Cyclic specs instead leak into the terminal with positive
//! probability from every state-action pair.

use rand::seq::SliceRandom;
use rand::Rng;

use super::reward::RewardKind;
use super::spec::{DrmdpSpec, SpecBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandomReward {
    Sum,
    WeightedSum,
    Square,
    /// Free per-step values under the max functional.
    Max,
    /// Max functional with per-step values increasing strictly across layers, so the
    /// interval maximum is always its last step. Only meaningful for layered specs.
    MonotoneMax,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSpecConfig {
    pub layered: bool,
    /// Layers for layered specs; non-terminal state count for cyclic ones.
    pub size: usize,
    /// States per layer (layered only).
    pub max_width: usize,
    pub max_actions: usize,
    pub max_interval: usize,
    pub overlap: usize,
    pub reward: RandomReward,
}

impl Default for RandomSpecConfig {
    fn default() -> Self {
        Self {
            layered: true,
            size: 4,
            max_width: 2,
            max_actions: 2,
            max_interval: 3,
            overlap: 0,
            reward: RandomReward::Sum,
        }
    }
}

fn split_mass<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut out: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let head: f64 = out[..k - 1].iter().sum();
    out[k - 1] = 1.0 - head;
    out
}

pub fn random_spec<R: Rng + ?Sized>(rng: &mut R, cfg: &RandomSpecConfig) -> DrmdpSpec {
    let kind = match cfg.reward {
        RandomReward::Sum => RewardKind::Sum,
        RandomReward::WeightedSum => RewardKind::WeightedSum,
        RandomReward::Square => RewardKind::Square,
        RandomReward::Max | RandomReward::MonotoneMax => RewardKind::Max,
    };
    let overlap = match kind {
        RewardKind::Max | RewardKind::Square => 0,
        _ => cfg.overlap,
    };
    // (name, layer)
    let mut states: Vec<(String, usize)> = Vec::new();
    if cfg.layered {
        for layer in 0..cfg.size.max(1) {
            let width = rng.random_range(1..=cfg.max_width.max(1));
            for i in 0..width {
                states.push((format!("L{layer}S{i}"), layer));
            }
        }
    } else {
        for i in 0..cfg.size.max(1) {
            states.push((format!("S{i}"), 0));
        }
    }
    let mut b = SpecBuilder::default();
    for (name, _) in &states {
        b = b.state(name);
    }
    b = b.absorbing_state("T");
    let top = states.iter().map(|s| s.1).max().unwrap_or(0);
    let roots: Vec<&String> = if cfg.layered {
        states.iter().filter(|s| s.1 == 0).map(|s| &s.0).collect()
    } else {
        vec![&states[0].0]
    };
    let mass = split_mass(rng, roots.len());
    for (name, p) in roots.iter().zip(mass) {
        b = b.initial(name, p);
    }
    for (name, layer) in &states {
        let n_act = rng.random_range(1..=cfg.max_actions.max(1));
        for a in 0..n_act {
            let act = format!("a{a}");
            b = b.action(name, &act);
            let mut targets: Vec<&String> = if !cfg.layered {
                states.iter().map(|s| &s.0).collect()
            } else if *layer == top {
                Vec::new()
            } else {
                states.iter().filter(|s| s.1 == layer + 1).map(|s| &s.0).collect()
            };
            targets.shuffle(rng);
            targets.truncate(rng.random_range(1..=2));
            if targets.is_empty() {
                b = b.transition(name, &act, "T", 1.0);
            } else if cfg.layered {
                for (t, p) in targets.iter().zip(split_mass(rng, targets.len())) {
                    b = b.transition(name, &act, t, p);
                }
            } else {
                let leak = rng.random_range(0.1..0.4);
                b = b.transition(name, &act, "T", leak);
                for (t, p) in targets.iter().zip(split_mass(rng, targets.len())) {
                    b = b.transition(name, &act, t, p * (1.0 - leak));
                }
            }
            let r = match cfg.reward {
                RandomReward::MonotoneMax => *layer as f64 + rng.random_range(0.0..0.9),
                RandomReward::Square => rng.random_range(-2.0..2.0),
                _ => rng.random_range(-1.0..1.0),
            };
            b = b.step_reward(name, &act, r);
        }
    }
    let mut lengths: Vec<usize> = (1..=cfg.max_interval.max(1)).collect();
    lengths.shuffle(rng);
    lengths.truncate(rng.random_range(1..=lengths.len()));
    lengths.sort_unstable();
    for (n, p) in lengths.iter().zip(split_mass(rng, lengths.len())) {
        b = b.interval(*n, p);
    }
    if kind == RewardKind::WeightedSum {
        let w = (0..overlap + cfg.max_interval.max(1)).map(|_| rng.random_range(0.0..=1.0)).collect();
        b = b.weights(w);
    }
    b.reward_kind(kind)
        .overlap(overlap)
        .gamma(rng.random_range(0.6..0.95))
        .build()
        .expect("generated spec is valid")
}
