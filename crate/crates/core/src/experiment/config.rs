//! Run configuration, read from TOML. Every key is required unless marked optional, and
//! unknown keys are rejected.
//!
//! ```toml
//! seeds = [0, 1, 2, 3, 4]
//! output_dir = "runs/point-reach"
//!
//! [env]
//! kind = "point-reach"        # or "point-reach-dense"
//! grid_size = 20.0
//! interval = 8
//! step_limit = 120
//! bonus = 10.0
//! start = [0.0, 0.0]
//! # point-reach-dense only:
//! # aggregation = "sum"       # sum | max | square
//! # interval_min = 4          # lengths uniform on interval_min..=interval
//! # overlap = 0
//!
//! [critic]
//! algorithm = "hc"            # hc | ircr
//! structure = "singleton"     # singleton | pairwise-K
//! hidden = [32, 32]
//! lambda = 0.05
//! lr = 3e-4
//!
//! [actor]
//! hidden = [32, 32]
//! lr = 3e-4
//!
//! [train]
//! gamma = 0.99
//! env_steps = 50000
//! start_steps = 2000
//! gradient_steps = 1
//! batch_size = 64
//! buffer_capacity = 100000
//! tau_target = 0.005
//! exploration_noise = 0.3
//! eval_every = 1000
//! eval_episodes = 1
//! snapshot_every = 0          # 0: final snapshot only
//! variance_probe_every = 0    # 0: no probe
//! variance_batch = 64
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::approx::HKind;
use crate::drmdp::IntervalLaw;
use crate::env::{Aggregation, PointReachConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub output_dir: String,
    pub env: EnvConfig,
    pub critic: CriticConfig,
    pub actor: ActorConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKind {
    PointReach,
    PointReachDense,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub kind: EnvKind,
    pub grid_size: f64,
    pub interval: usize,
    pub step_limit: usize,
    pub bonus: f64,
    pub start: [f64; 2],
    pub aggregation: Option<String>,
    pub interval_min: Option<usize>,
    pub overlap: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Hc,
    Ircr,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticConfig {
    pub algorithm: Algorithm,
    pub structure: String,
    pub hidden: Vec<usize>,
    pub lambda: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub env_steps: usize,
    pub start_steps: usize,
    pub gradient_steps: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub tau_target: f64,
    pub exploration_noise: f64,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub snapshot_every: usize,
    pub variance_probe_every: usize,
    pub variance_batch: usize,
}

impl EnvConfig {
    pub fn point_reach(&self) -> PointReachConfig {
        PointReachConfig {
            grid_size: self.grid_size,
            interval: self.interval,
            step_limit: self.step_limit,
            bonus: self.bonus,
            start: self.start,
        }
    }

    pub fn aggregation(&self) -> Result<Aggregation> {
        self.aggregation
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("point-reach-dense needs `aggregation`".into()))?
            .parse()
    }

    pub fn law(&self) -> Result<IntervalLaw> {
        IntervalLaw::uniform(self.interval_min.unwrap_or(self.interval), self.interval)
    }
}

impl RunConfig {
    /// Desk-scale Point Reach with an HC-Singleton critic.
    pub fn desk() -> Self {
        let pr = PointReachConfig::default();
        Self {
            seeds: vec![0, 1, 2, 3, 4],
            output_dir: "runs/point-reach".into(),
            env: EnvConfig {
                kind: EnvKind::PointReach,
                grid_size: pr.grid_size,
                interval: pr.interval,
                step_limit: pr.step_limit,
                bonus: pr.bonus,
                start: pr.start,
                aggregation: None,
                interval_min: None,
                overlap: None,
            },
            critic: CriticConfig {
                algorithm: Algorithm::Hc,
                structure: "singleton".into(),
                hidden: vec![32, 32],
                lambda: 0.05,
                lr: 3e-4,
            },
            actor: ActorConfig { hidden: vec![32, 32], lr: 3e-4 },
            train: TrainConfig {
                gamma: 0.99,
                env_steps: 50_000,
                start_steps: 2_000,
                gradient_steps: 1,
                batch_size: 64,
                buffer_capacity: 100_000,
                tau_target: 0.005,
                exploration_noise: 0.3,
                eval_every: 1_000,
                eval_episodes: 1,
                snapshot_every: 0,
                variance_probe_every: 0,
                variance_batch: 64,
            },
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn structure(&self) -> Result<HKind> {
        HKind::parse(&self.critic.structure)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        let t = &self.train;
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if t.env_steps == 0 || t.batch_size == 0 || t.buffer_capacity == 0 || t.eval_every == 0 || t.eval_episodes == 0 {
            return bad("env_steps, batch_size, buffer_capacity, eval_every and eval_episodes must be positive");
        }
        if !(t.gamma > 0.0 && t.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(t.tau_target > 0.0 && t.tau_target <= 1.0) {
            return bad("tau_target must lie in (0, 1]");
        }
        if !(t.exploration_noise >= 0.0) {
            return bad("exploration_noise must be nonnegative");
        }
        if t.variance_probe_every > 0 && t.variance_batch < 2 {
            return bad("variance_batch must be at least 2");
        }
        if !(self.critic.lambda >= 0.0) {
            return bad("lambda must be nonnegative");
        }
        if !(self.critic.lr > 0.0 && self.actor.lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.critic.hidden.contains(&0) || self.actor.hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        self.structure()?;
        self.env.point_reach().validate()?;
        match self.env.kind {
            EnvKind::PointReach => {
                if self.env.aggregation.is_some() || self.env.interval_min.is_some() || self.env.overlap.is_some() {
                    return bad("aggregation, interval_min and overlap apply to point-reach-dense only");
                }
            }
            EnvKind::PointReachDense => {
                let kind = self.env.aggregation()?;
                self.env.law()?;
                if self.env.overlap.unwrap_or(0) > 0 && kind != Aggregation::Sum {
                    return bad("overlap requires the sum aggregation");
                }
            }
        }
        Ok(())
    }
}
