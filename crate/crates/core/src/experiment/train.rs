//! Off-policy actor-critic loop over a delayed-reward environment.
//!
//! Per env step: act with `π(s_t, t − t_i)` plus uniform noise, store the record, then per
//! gradient step sample a batch, take one critic step, one actor step through the critic's
//! action gradient, and soft-update the critic targets.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Algorithm, EnvKind, RunConfig};
use super::metrics::{write_metrics_csv, MetricsRow};
use super::replay::{ReplayBuffer, ReplayRecord, SegmentStep};
use crate::approx::{
    estimate_gradient_variance, hc_policy_gradient, hc_td_loss, monolithic_td_loss, ActionCritic, Adam,
    DeterministicPolicy, FeatureLayout, HKind, HcCritic, LossOutput, Mlp, MlpArch, MonolithicCritic, ParamSnapshot,
    TdSettings,
};
use crate::env::{wrap_delayed, write_trace_csv, DelayedEnv, PointReachDense, PointReachEnv, TraceRow};
use crate::error::{Error, Result};

pub fn make_env(cfg: &RunConfig) -> Result<Box<dyn DelayedEnv>> {
    let pr = cfg.env.point_reach();
    Ok(match cfg.env.kind {
        EnvKind::PointReach => Box::new(PointReachEnv::new(pr)?),
        EnvKind::PointReachDense => Box::new(wrap_delayed(
            PointReachDense::new(pr)?,
            cfg.env.aggregation()?,
            cfg.env.law()?,
            cfg.env.overlap.unwrap_or(0),
        )?),
    })
}

/// Plain `Q(s, phase, a)` critic trained on redistributed interval rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct IrcrCritic {
    layout: FeatureLayout,
    pub q: Mlp,
    pub target: Mlp,
}

impl IrcrCritic {
    pub fn new<R: Rng + ?Sized>(layout: FeatureLayout, hidden: &[usize], rng: &mut R) -> Self {
        let q = Mlp::new(MlpArch::scalar(layout.step_dim(), hidden), rng);
        Self { layout, target: q.clone(), q }
    }

    fn steps(&self, steps: &[SegmentStep]) -> Array2<f64> {
        let mut x = Array2::zeros((steps.len(), self.layout.step_dim()));
        for (mut row, s) in x.rows_mut().into_iter().zip(steps) {
            self.layout.write_step(&s.obs, s.phase, &s.action, row.as_slice_mut().expect("standard layout"));
        }
        x
    }
}

impl ActionCritic for IrcrCritic {
    fn action_gradients(&self, batch: &[&ReplayRecord], actions: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let steps: Vec<SegmentStep> = batch
            .iter()
            .zip(actions.rows())
            .map(|(r, a)| SegmentStep { action: a.to_vec(), ..r.current().clone() })
            .collect();
        let tape = self.q.forward_tape(self.steps(&steps).view());
        let mut scratch = vec![0.0; self.q.num_params()];
        let dx = self.q.backward(&tape, Array2::ones((batch.len(), 1)).view(), &mut scratch);
        Ok(dx.slice(ndarray::s![.., self.layout.action_cols()]).to_owned())
    }
}

/// `mean (g + γ Q̄(s', phase', π(s', phase')) − Q(s, phase, a))²` where `g` is the record's
/// guidance reward.
pub fn ircr_td_loss(critic: &IrcrCritic, batch: &[&ReplayRecord], policy: &DeterministicPolicy, gamma: f64) -> Result<LossOutput> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let b = batch.len();
    let mut targets: Vec<f64> = batch.iter().map(|r| r.reward).collect();
    let live: Vec<usize> = (0..b).filter(|&i| !batch[i].terminal).collect();
    if !live.is_empty() {
        let states = policy.states_matrix(live.iter().map(|&i| (batch[i].next_obs.as_slice(), batch[i].next_phase())));
        let actions = policy.net().forward_batch(states.view());
        let next: Vec<SegmentStep> = live
            .iter()
            .zip(actions.rows())
            .map(|(&i, a)| SegmentStep { obs: batch[i].next_obs.clone(), action: a.to_vec(), phase: batch[i].next_phase() })
            .collect();
        let v = critic.target.forward_batch(critic.steps(&next).view());
        for (r, &i) in live.iter().enumerate() {
            targets[i] += gamma * v[[r, 0]];
        }
    }
    let cur: Vec<SegmentStep> = batch.iter().map(|r| r.current().clone()).collect();
    let tape = critic.q.forward_tape(critic.steps(&cur).view());
    let mut td = 0.0;
    let dy = Array2::from_shape_fn((b, 1), |(i, _)| {
        let d = tape.output()[[i, 0]] - targets[i];
        td += d * d;
        2.0 * d / b as f64
    });
    let mut grad = vec![0.0; critic.q.num_params()];
    critic.q.backward(&tape, dy.view(), &mut grad);
    td /= b as f64;
    Ok(LossOutput { loss: td, td, reg: 0.0, grad })
}

/// Holds an interval's records back until it closes, then gives every one of them the
/// interval reward as its guidance reward.
#[derive(Debug, Clone, Default)]
pub struct IrcrRedistributor {
    pending: Vec<ReplayRecord>,
}

impl IrcrRedistributor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records released by this push, oldest first; empty while the interval is open.
    pub fn push(&mut self, record: ReplayRecord) -> Vec<ReplayRecord> {
        let end = record.interval_end.then_some(record.reward);
        self.pending.push(record);
        match end {
            Some(reward) => self
                .pending
                .drain(..)
                .map(|mut r| {
                    r.reward = reward;
                    r
                })
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }
}

enum Learner {
    Hc { critic: HcCritic, opt: Adam },
    Ircr { critic: IrcrCritic, opt: Adam },
}

struct Probe {
    hc: HcCritic,
    hc_opt: Adam,
    mono: MonolithicCritic,
    mono_opt: Adam,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub seed: u64,
    pub metrics: Vec<MetricsRow>,
    pub final_snapshot: ParamSnapshot,
    /// `(env step, snapshot)` at the configured cadence.
    pub snapshots: Vec<(usize, ParamSnapshot)>,
    pub policy: DeterministicPolicy,
    /// Number of policy updates, the last `behavior_id` used.
    pub policy_updates: u64,
    /// Last evaluation episode.
    pub trace: Vec<TraceRow>,
    pub clipped_actions: usize,
}

#[derive(Default)]
struct Running {
    td: f64,
    reg: f64,
    losses: usize,
    hc_var: f64,
    mono_var: f64,
    probes: usize,
}

fn mean(total: f64, n: usize) -> Option<f64> {
    (n > 0).then(|| total / n as f64)
}

fn check_finite(out: &LossOutput, what: &str, seed: u64, step: usize) -> Result<()> {
    if out.loss.is_finite() && out.grad.iter().all(|g| g.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence(format!("seed {seed}, env step {step}: {what} loss is {}", out.loss)))
    }
}

/// Deterministic rollouts of the noiseless policy: `(mean return, mean episode length, trace of the last)`.
fn evaluate(cfg: &RunConfig, policy: &DeterministicPolicy, seed: u64) -> Result<(f64, f64, Vec<TraceRow>)> {
    let mut env = make_env(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xE7A1u64);
    let scale = cfg.env.grid_size;
    let (mut ret, mut len) = (0.0, 0.0);
    let mut trace = Vec::new();
    for _ in 0..cfg.train.eval_episodes {
        trace.clear();
        let mut obs = env.reset(&mut rng);
        let mut phase = 0;
        let mut t = 0;
        loop {
            let a = policy.act(&obs, phase);
            let tr = env.step(&a, &mut rng)?;
            trace.push(TraceRow {
                t,
                x: obs[0] * scale,
                y: obs[1] * scale,
                a_x: a[0],
                a_y: a[1],
                phase: tr.phase,
                reward: tr.reward,
                done: tr.done,
            });
            ret += tr.reward;
            t += 1;
            phase = if tr.interval_end { 0 } else { phase + 1 };
            obs = tr.obs;
            if tr.done {
                break;
            }
        }
        len += t as f64;
    }
    let n = cfg.train.eval_episodes as f64;
    Ok((ret / n, len / n, trace))
}

fn snapshot_of(policy: &DeterministicPolicy, learner: &Learner) -> ParamSnapshot {
    let mut snap = ParamSnapshot::new();
    snap.insert("policy", policy.net());
    match learner {
        Learner::Hc { critic, .. } => {
            snap.insert("critic.c", &critic.c);
            for (k, net) in critic.h.nets().iter().enumerate() {
                snap.insert(&format!("critic.h{k}"), net);
            }
        }
        Learner::Ircr { critic, .. } => snap.insert("critic.q", &critic.q),
    }
    snap
}

fn uniform_action(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Runs one seed. Uses `config.critic.algorithm` to pick the HC critic or the IRCR baseline.
pub fn train(config: &RunConfig, seed: u64) -> Result<TrainOutcome> {
    config.validate()?;
    let t = &config.train;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
    let mut env = make_env(config)?;
    let overlap = env.overlap();
    let layout = FeatureLayout::new(env.obs_dim(), env.action_dim(), env.max_interval());
    let settings = TdSettings { gamma: t.gamma, overlap };

    let mut policy = DeterministicPolicy::new(layout, &config.actor.hidden, &mut rng);
    let mut actor_opt = Adam::new(policy.net().num_params(), config.actor.lr);
    let mut learner = match config.critic.algorithm {
        Algorithm::Hc => {
            let critic = HcCritic::new(config.structure()?, layout, &config.critic.hidden, config.critic.lambda, &mut rng);
            let opt = Adam::new(critic.num_params(), config.critic.lr);
            Learner::Hc { critic, opt }
        }
        Algorithm::Ircr => {
            let critic = IrcrCritic::new(layout, &config.critic.hidden, &mut rng);
            let opt = Adam::new(critic.q.num_params(), config.critic.lr);
            Learner::Ircr { critic, opt }
        }
    };
    // Separate stream so that probing leaves the training run unchanged. The IRCR buffer
    // holds redistributed per-step rewards, which the delayed critics cannot consume.
    let mut probe_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5E_ED0F_9A0B);
    let probing = t.variance_probe_every > 0 && config.critic.algorithm == Algorithm::Hc;
    let mut probe = probing.then(|| {
        let hc = HcCritic::new(HKind::Singleton, layout, &config.critic.hidden, config.critic.lambda, &mut probe_rng);
        let mono = MonolithicCritic::new(layout, env.max_interval() + overlap, &config.critic.hidden, &mut probe_rng);
        Probe {
            hc_opt: Adam::new(hc.num_params(), config.critic.lr),
            mono_opt: Adam::new(mono.net.num_params(), config.critic.lr),
            hc,
            mono,
        }
    });

    let mut buffer = ReplayBuffer::new(t.buffer_capacity)?;
    let mut redistributor = IrcrRedistributor::new();
    let mut metrics = Vec::new();
    let mut snapshots = Vec::new();
    let mut running = Running::default();
    let mut trace = Vec::new();
    let mut behavior_id = 0u64;
    let mut episode = 0u64;
    let mut clipped_actions = 0usize;

    let mut obs = env.reset(&mut env_rng);
    let mut segment: Vec<SegmentStep> = Vec::new();
    let mut prefix_len = 0usize;
    let mut ep_step = 0usize;

    for step in 1..=t.env_steps {
        let phase = segment.len() - prefix_len;
        let action = if step <= t.start_steps {
            uniform_action(&mut rng, layout.action_dim)
        } else {
            policy
                .act(&obs, phase)
                .into_iter()
                .map(|a| (a + rng.random_range(-1.0..=1.0) * t.exploration_noise).clamp(-1.0, 1.0))
                .collect()
        };
        let tr = env.step(&action, &mut env_rng)?;
        clipped_actions += usize::from(tr.clipped);
        debug_assert_eq!(tr.phase, phase);
        segment.push(SegmentStep { obs: obs.clone(), action, phase });
        let record = ReplayRecord {
            segment: segment.clone(),
            prefix_len,
            reward: tr.reward,
            next_obs: tr.obs.clone(),
            interval_end: tr.interval_end,
            terminal: tr.terminal,
            behavior_id,
            episode,
            step: ep_step,
        };
        match learner {
            Learner::Hc { .. } => buffer.push(record),
            Learner::Ircr { .. } => redistributor.push(record).into_iter().for_each(|r| buffer.push(r)),
        }
        if tr.interval_end {
            let keep = overlap.min(segment.len());
            segment.drain(..segment.len() - keep);
            prefix_len = keep;
        }
        ep_step += 1;
        obs = tr.obs;
        if tr.done {
            obs = env.reset(&mut env_rng);
            segment.clear();
            prefix_len = 0;
            ep_step = 0;
            episode += 1;
        }

        if buffer.len() >= t.batch_size && step > t.start_steps {
            for _ in 0..t.gradient_steps {
                let batch = buffer.sample(&mut rng, t.batch_size);
                let pg = match &mut learner {
                    Learner::Hc { critic, opt } => {
                        let out = hc_td_loss(critic, &batch, &policy, settings)?;
                        check_finite(&out, "critic", seed, step)?;
                        running.td += out.td;
                        running.reg += out.reg;
                        running.losses += 1;
                        let mut p = critic.flat_params();
                        opt.step(&mut p, &out.grad);
                        critic.set_flat_params(&p);
                        let g = hc_policy_gradient(critic, &batch, &policy)?;
                        critic.soft_update_targets(t.tau_target)?;
                        g
                    }
                    Learner::Ircr { critic, opt } => {
                        let out = ircr_td_loss(critic, &batch, &policy, t.gamma)?;
                        check_finite(&out, "critic", seed, step)?;
                        running.td += out.td;
                        running.losses += 1;
                        opt.step(critic.q.params_mut(), &out.grad);
                        let g = crate::approx::policy_gradient(critic, &batch, &policy)?;
                        critic.q.soft_update_into(&mut critic.target, t.tau_target);
                        g
                    }
                };
                if let Some(pr) = &mut probe {
                    let out = hc_td_loss(&pr.hc, &batch, &policy, settings)?;
                    check_finite(&out, "probe HC", seed, step)?;
                    let mut p = pr.hc.flat_params();
                    pr.hc_opt.step(&mut p, &out.grad);
                    pr.hc.set_flat_params(&p);
                    pr.hc.soft_update_targets(t.tau_target)?;
                    let out = monolithic_td_loss(&pr.mono, &batch, &policy, settings)?;
                    check_finite(&out, "probe monolithic", seed, step)?;
                    pr.mono_opt.step(pr.mono.net.params_mut(), &out.grad);
                    pr.mono.soft_update_targets(t.tau_target)?;
                }
                if pg.iter().any(|g| !g.is_finite()) {
                    return Err(Error::Divergence(format!("seed {seed}, env step {step}: policy gradient")));
                }
                let neg: Vec<f64> = pg.iter().map(|g| -g).collect();
                actor_opt.step(policy.net_mut().params_mut(), &neg);
                behavior_id += 1;
            }
        }

        if let Some(pr) = &probe {
            if step % t.variance_probe_every == 0 && buffer.len() >= t.variance_batch && step > t.start_steps {
                let batch = buffer.sample(&mut probe_rng, t.variance_batch);
                let v = estimate_gradient_variance(&pr.hc, &pr.mono, &batch, &policy)?;
                running.hc_var += v.hc_variance;
                running.mono_var += v.monolithic_variance;
                running.probes += 1;
            }
        }

        if step % t.eval_every == 0 || step == t.env_steps {
            let (ret, len, tr) = evaluate(config, &policy, seed)?;
            trace = tr;
            metrics.push(MetricsRow {
                env_step: step,
                episodic_return: ret,
                steps_to_target: len,
                td_loss: mean(running.td, running.losses),
                reg_loss: mean(running.reg, running.losses).filter(|_| matches!(learner, Learner::Hc { .. })),
                hc_variance: mean(running.hc_var, running.probes),
                monolithic_variance: mean(running.mono_var, running.probes),
            });
            running = Running::default();
        }
        if t.snapshot_every > 0 && step % t.snapshot_every == 0 {
            snapshots.push((step, snapshot_of(&policy, &learner)));
        }
    }

    Ok(TrainOutcome {
        seed,
        metrics,
        final_snapshot: snapshot_of(&policy, &learner),
        snapshots,
        policy,
        policy_updates: behavior_id,
        trace,
        clipped_actions,
    })
}

/// Same loop with the IRCR critic regardless of `config.critic.algorithm`.
pub fn ircr_baseline_train(config: &RunConfig, seed: u64) -> Result<TrainOutcome> {
    let mut cfg = config.clone();
    cfg.critic.algorithm = Algorithm::Ircr;
    train(&cfg, seed)
}

/// Writes `metrics.csv`, `trace.csv`, `final.params` and `step-N.params` under
/// `<dir>/seed-<seed>/`; returns that directory.
pub fn write_outcome(outcome: &TrainOutcome, dir: &Path) -> Result<PathBuf> {
    let out = dir.join(format!("seed-{}", outcome.seed));
    fs::create_dir_all(&out)?;
    write_metrics_csv(&outcome.metrics, fs::File::create(out.join("metrics.csv"))?)?;
    write_trace_csv(&outcome.trace, fs::File::create(out.join("trace.csv"))?)?;
    outcome.final_snapshot.save(&out.join("final.params"))?;
    for (step, snap) in &outcome.snapshots {
        snap.save(&out.join(format!("step-{step}.params")))?;
    }
    Ok(out)
}
