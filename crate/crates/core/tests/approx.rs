use drmdp_core::approx::{
    hc_policy_gradient, hc_td_loss, monolithic_trajectory_gradient, policy_gradient, reg_loss, summed_sample_variance,
    ActionCritic, Adam, DeterministicPolicy, FeatureLayout, HKind, HStructure, HcCritic, Mlp, MlpArch,
    MonolithicCritic, OutputActivation, ParamSnapshot, TdSettings,
};
use drmdp_core::experiment::gradcheck::{numeric_gradient, relative_error, synthetic_records};
use drmdp_core::experiment::{ReplayRecord, SegmentStep};
use drmdp_core::{Error, Result};
use ndarray::{Array2, ArrayView2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn step(obs: &[f64], action: &[f64], phase: usize) -> SegmentStep {
    SegmentStep { obs: obs.to_vec(), action: action.to_vec(), phase }
}

fn record(segment: Vec<SegmentStep>, reward: f64, next_obs: &[f64], interval_end: bool, terminal: bool) -> ReplayRecord {
    ReplayRecord {
        segment,
        prefix_len: 0,
        reward,
        next_obs: next_obs.to_vec(),
        interval_end,
        terminal,
        behavior_id: 0,
        episode: 0,
        step: 0,
    }
}

fn linear(input: usize, params: &[f64]) -> Mlp {
    Mlp::from_params(MlpArch::scalar(input, &[]), params.to_vec()).unwrap()
}

fn zero_policy(layout: FeatureLayout) -> DeterministicPolicy {
    let arch = MlpArch::new(layout.state_dim(), &[], layout.action_dim, OutputActivation::Tanh);
    DeterministicPolicy::from_net(layout, Mlp::zeros(arch)).unwrap()
}

#[test]
fn mlp_descriptor_round_trip_and_param_count() {
    let arch = MlpArch::scalar(5, &[32, 32]);
    assert_eq!(arch.descriptor(), "mlp 5-32-32-1 identity");
    assert_eq!(MlpArch::parse_descriptor(&arch.descriptor()).unwrap(), arch);
    assert_eq!(arch.num_params(), 5 * 32 + 32 + 32 * 32 + 32 + 32 + 1);
    let tanh = MlpArch::new(3, &[4], 2, OutputActivation::Tanh);
    assert_eq!(MlpArch::parse_descriptor(&tanh.descriptor()).unwrap(), tanh);
    assert!(MlpArch::parse_descriptor("mlp 5-x-1 identity").is_err());
    assert!(Mlp::from_params(arch, vec![0.0; 3]).is_err());
}

#[test]
fn final_layer_range_is_the_output_layer() {
    let net = Mlp::new(MlpArch::new(3, &[4, 5], 2, OutputActivation::Tanh), &mut rng(0));
    let r = net.final_layer_range();
    assert_eq!(r.end, net.num_params());
    assert_eq!(r.len(), 5 * 2 + 2);
}

#[test]
fn adam_descends_a_quadratic() {
    let mut p = vec![3.0, -2.0];
    let mut opt = Adam::new(2, 0.05);
    for _ in 0..2000 {
        let g: Vec<f64> = p.iter().map(|x| 2.0 * (x - 1.0)).collect();
        opt.step(&mut p, &g);
    }
    assert!(p.iter().all(|x| (x - 1.0).abs() < 1e-3), "{p:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mlp_gradients_match_finite_differences(seed in 0u64..10_000, width in 1usize..10, depth in 0usize..3) {
        let mut r = rng(seed);
        let hidden = vec![width; depth];
        let net = Mlp::new(MlpArch::scalar(4, &hidden), &mut r);
        let x: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
        let (dp, dx) = net.gradient(&x);
        let arch = net.arch().clone();
        let np = numeric_gradient(|p| Mlp::from_params(arch.clone(), p.to_vec()).unwrap().value(&x), net.params());
        let nx = numeric_gradient(|z| net.value(z), &x);
        prop_assert!(relative_error(&dp, &np) < 1e-5);
        prop_assert!(relative_error(&dx, &nx) < 1e-5);
    }

    #[test]
    fn singleton_is_additive(seed in 0u64..10_000, len in 0usize..6) {
        let mut r = rng(seed);
        let layout = FeatureLayout::new(2, 2, 8);
        let h = HStructure::new(HKind::Singleton, layout, &[8], &mut r);
        let recs = synthetic_records(&mut r, layout, 0, 1);
        let mut hist: Vec<SegmentStep> = recs[0].segment.iter().take(len).cloned().collect();
        let before = h.value(&hist);
        let extra = recs[0].segment.last().unwrap().clone();
        hist.push(extra.clone());
        let b = h.nets()[0].value(&layout.step_features(&extra));
        prop_assert!((h.value(&hist) - before - b).abs() < 1e-12);
    }

    #[test]
    fn critic_value_is_h_plus_c_bitwise(seed in 0u64..10_000, k in 0usize..3) {
        let mut r = rng(seed);
        let layout = FeatureLayout::new(2, 2, 6);
        let kind = if k == 0 { HKind::Singleton } else { HKind::PairwiseK(k) };
        let critic = HcCritic::new(kind, layout, &[6], 0.1, &mut r);
        for rec in synthetic_records(&mut r, layout, 1, 4) {
            let (last, hist) = rec.segment.split_last().unwrap();
            let split = critic.h.value(hist) + critic.c_value(last);
            prop_assert_eq!(critic.value(&rec.segment).to_bits(), split.to_bits());
        }
    }
}

#[test]
fn empty_history_contributes_nothing() {
    let layout = FeatureLayout::new(2, 2, 4);
    for kind in [HKind::Singleton, HKind::PairwiseK(1), HKind::PairwiseK(3)] {
        let h = HStructure::new(kind, layout, &[4], &mut rng(1));
        assert_eq!(h.value(&[]), 0.0);
        assert_eq!(h.nets().len(), kind.num_nets());
    }
}

#[test]
fn pairwise_term_count() {
    // Every c^k ≡ 1 counts the (j, j + k) pairs inside the history.
    let layout = FeatureLayout::new(1, 1, 8);
    let k = 2;
    let nets: Vec<Mlp> = (0..=k)
        .map(|i| {
            let input = if i == 0 { layout.step_dim() } else { 2 * layout.step_dim() };
            let mut params = vec![0.0; input + 1];
            params[input] = 1.0;
            linear(input, &params)
        })
        .collect();
    let h = HStructure::from_nets(HKind::PairwiseK(k), layout, nets).unwrap();
    for m in 0..7usize {
        let hist: Vec<SegmentStep> = (0..m).map(|p| step(&[0.1], &[0.0], p)).collect();
        let expect: usize = (0..=k).map(|d| m.saturating_sub(d)).sum();
        assert_eq!(h.value(&hist), expect as f64, "history of {m}");
    }
    assert!(HStructure::from_nets(HKind::PairwiseK(k), layout, vec![]).is_err());
}

#[test]
fn h_kind_names() {
    assert_eq!(HKind::parse("singleton").unwrap(), HKind::Singleton);
    assert_eq!(HKind::parse("pairwise-3").unwrap(), HKind::PairwiseK(3));
    assert_eq!(HKind::PairwiseK(3).name(), "pairwise-3");
    assert_eq!(HKind::PairwiseK(3).num_nets(), 4);
    assert!(HKind::parse("rnn").is_err());
}

#[test]
fn reg_loss_against_zero_h() {
    let layout = FeatureLayout::new(1, 1, 4);
    let h = HStructure::from_nets(HKind::Singleton, layout, vec![Mlp::zeros(MlpArch::scalar(3, &[]))]).unwrap();
    let a = vec![step(&[0.2], &[0.1], 0), step(&[0.3], &[0.1], 1)];
    let b = vec![step(&[0.5], &[-0.4], 0)];
    let (loss, grad) = reg_loss(&h, &[(&a, 1.0), (&b, 2.0)]);
    assert_eq!(loss, 2.5);
    assert_eq!(grad.len(), 4);
    let (loss, grad) = reg_loss(&h, &[]);
    assert_eq!((loss, grad.iter().all(|g| *g == 0.0)), (0.0, true));
}

#[test]
fn reg_loss_vanishes_when_b_matches_per_step_rewards() {
    // b(step) = obs, and each interval's reward is the sum of its observations.
    let layout = FeatureLayout::new(1, 1, 4);
    let h = HStructure::from_nets(HKind::Singleton, layout, vec![linear(3, &[1.0, 0.0, 0.0, 0.0])]).unwrap();
    let a = vec![step(&[0.2], &[0.1], 0), step(&[0.7], &[0.9], 1), step(&[0.4], &[-1.0], 2)];
    let b = vec![step(&[0.5], &[-0.4], 0)];
    let (loss, grad) = reg_loss(&h, &[(&a, 0.2 + 0.7 + 0.4), (&b, 0.5)]);
    assert!(loss < 1e-30);
    assert!(grad.iter().all(|g| g.abs() < 1e-15));
}

#[test]
fn td_gradient_for_linear_critic_terminal_step() {
    // λ = 0, one terminal record at phase 0: loss = (w·x + b − R)².
    let layout = FeatureLayout::new(1, 1, 2);
    let w = [0.3, -0.2, 0.5];
    let bias = 0.1;
    let h = HStructure::from_nets(HKind::Singleton, layout, vec![linear(3, &[0.7, 0.7, 0.7, 0.7])]).unwrap();
    let critic = HcCritic::from_parts(h, linear(3, &[w[0], w[1], w[2], bias]), 0.0);
    let rec = record(vec![step(&[0.4], &[0.6], 0)], 2.0, &[0.5], true, true);
    let out = hc_td_loss(&critic, &[&rec], &zero_policy(layout), TdSettings { gamma: 0.9, overlap: 0 }).unwrap();
    let x = [0.4, 0.0, 0.6];
    let q = w[0] * x[0] + w[1] * x[1] + w[2] * x[2] + bias;
    let delta = q - 2.0;
    assert!((out.loss - delta * delta).abs() < 1e-15);
    assert_eq!(out.loss, out.td);
    let expect = [0.0, 0.0, 0.0, 0.0, 2.0 * delta * x[0], 2.0 * delta * x[1], 2.0 * delta * x[2], 2.0 * delta];
    for (g, e) in out.grad.iter().zip(expect) {
        assert!((g - e).abs() < 1e-14, "{:?}", out.grad);
    }
}

#[test]
fn td_target_bootstraps_through_target_nets() {
    let layout = FeatureLayout::new(1, 1, 2);
    let b_net = linear(3, &[1.0, 2.0, 3.0, 0.25]);
    let c_net = linear(3, &[0.5, -1.0, 2.0, 0.0]);
    let h = HStructure::from_nets(HKind::Singleton, layout, vec![b_net]).unwrap();
    let critic = HcCritic::from_parts(h, c_net, 0.0);
    let s0 = step(&[0.4], &[0.6], 0);
    let rec = record(vec![s0], 0.0, &[0.8], false, false);
    let gamma = 0.9;
    let out = hc_td_loss(&critic, &[&rec], &zero_policy(layout), TdSettings { gamma, overlap: 0 }).unwrap();
    // Next history is [s0]; successor is (0.8, phase 1 → 0.5, a' = 0).
    let h_next = 1.0 * 0.4 + 2.0 * 0.0 + 3.0 * 0.6 + 0.25;
    let c_next = 0.5 * 0.8 - 1.0 * 0.5 + 0.0;
    let q = 0.5 * 0.4 - 1.0 * 0.0 + 2.0 * 0.6;
    let delta = q - gamma * (h_next + c_next);
    assert!((out.td - delta * delta).abs() < 1e-14);
    // Interval end with c = 0: the next history restarts empty.
    let end = record(vec![step(&[0.4], &[0.6], 0)], 1.0, &[0.8], true, false);
    let out = hc_td_loss(&critic, &[&end], &zero_policy(layout), TdSettings { gamma, overlap: 0 }).unwrap();
    let c_next = 0.5 * 0.8;
    let delta = q - (1.0 + gamma * c_next);
    assert!((out.td - delta * delta).abs() < 1e-14);
}

#[test]
fn lambda_zero_is_pure_td_and_lambda_adds_reg() {
    let layout = FeatureLayout::new(2, 2, 4);
    let mut r = rng(5);
    let recs = synthetic_records(&mut r, layout, 0, 16);
    let batch: Vec<&ReplayRecord> = recs.iter().collect();
    let policy = DeterministicPolicy::new(layout, &[8], &mut r);
    let mut critic = HcCritic::new(HKind::Singleton, layout, &[8], 0.0, &mut r);
    let s = TdSettings { gamma: 0.99, overlap: 0 };
    let plain = hc_td_loss(&critic, &batch, &policy, s).unwrap();
    assert_eq!(plain.loss, plain.td);
    critic.lambda = 2.0;
    let reg = hc_td_loss(&critic, &batch, &policy, s).unwrap();
    assert_eq!(reg.td, plain.td);
    assert!((reg.loss - (plain.td + 2.0 * reg.reg)).abs() < 1e-12);
}

#[test]
fn td_loss_rejects_malformed_records() {
    let layout = FeatureLayout::new(1, 1, 2);
    let mut r = rng(2);
    let critic = HcCritic::new(HKind::Singleton, layout, &[4], 0.0, &mut r);
    let policy = zero_policy(layout);
    let s = TdSettings { gamma: 0.9, overlap: 0 };
    let paid_early = record(vec![step(&[0.1], &[0.0], 0)], 1.0, &[0.2], false, false);
    assert!(hc_td_loss(&critic, &[&paid_early], &policy, s).is_err());
    let bad_phase = record(vec![step(&[0.1], &[0.0], 1)], 0.0, &[0.2], false, false);
    assert!(hc_td_loss(&critic, &[&bad_phase], &policy, s).is_err());
    let open_terminal = record(vec![step(&[0.1], &[0.0], 0)], 0.0, &[0.2], false, true);
    assert!(hc_td_loss(&critic, &[&open_terminal], &policy, s).is_err());
    assert!(hc_td_loss(&critic, &[], &policy, s).is_err());
}

/// `C(s, a) = −Σ (a_k − a*_k)²`.
struct Quadratic {
    target: Vec<f64>,
}

impl ActionCritic for Quadratic {
    fn action_gradients(&self, _batch: &[&ReplayRecord], actions: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(Array2::from_shape_fn(actions.dim(), |(i, k)| -2.0 * (actions[[i, k]] - self.target[k])))
    }
}

#[test]
fn policy_gradient_of_a_quadratic_critic() {
    let layout = FeatureLayout::new(2, 2, 4);
    let mut r = rng(9);
    let arch = MlpArch::new(layout.state_dim(), &[], 2, OutputActivation::Tanh);
    let policy = DeterministicPolicy::from_net(layout, Mlp::new(arch, &mut r)).unwrap();
    let recs = synthetic_records(&mut r, layout, 0, 5);
    let batch: Vec<&ReplayRecord> = recs.iter().collect();
    let critic = Quadratic { target: vec![0.3, -0.6] };
    let g = policy_gradient(&critic, &batch, &policy).unwrap();

    let d = layout.state_dim();
    let mut expect = vec![0.0; 2 * d + 2];
    for rec in &batch {
        let cur = rec.current();
        let mut x = vec![0.0; d];
        layout.write_state(&cur.obs, cur.phase, &mut x);
        let a = policy.act(&cur.obs, cur.phase);
        for k in 0..2 {
            let da = -2.0 * (a[k] - critic.target[k]) * (1.0 - a[k] * a[k]) / batch.len() as f64;
            for j in 0..d {
                expect[k * d + j] += da * x[j];
            }
            expect[2 * d + k] += da;
        }
    }
    assert!(relative_error(&g, &expect) < 1e-12, "{g:?} vs {expect:?}");
}

#[test]
fn zero_c_gives_zero_policy_gradient() {
    let layout = FeatureLayout::new(2, 2, 4);
    let mut r = rng(4);
    let mut critic = HcCritic::new(HKind::Singleton, layout, &[8], 0.0, &mut r);
    critic.c.params_mut().fill(0.0);
    let policy = DeterministicPolicy::new(layout, &[8], &mut r);
    let recs = synthetic_records(&mut r, layout, 0, 6);
    let batch: Vec<&ReplayRecord> = recs.iter().collect();
    assert!(hc_policy_gradient(&critic, &batch, &policy).unwrap().iter().all(|g| *g == 0.0));
}

#[test]
fn monolithic_gradient_matches_hc_when_history_is_ignored() {
    let layout = FeatureLayout::new(2, 2, 4);
    let mut r = rng(21);
    let hidden = [6];
    let c = Mlp::new(MlpArch::scalar(layout.step_dim(), &hidden), &mut r);
    let slots = 4;
    let block = layout.step_dim() + 1;
    // First layer copies C's weights onto slot 0 and ignores every other input.
    let input = slots * block;
    let mut mono_params = Vec::new();
    let d = layout.step_dim();
    let w = &c.params()[..hidden[0] * d];
    for row in 0..hidden[0] {
        let mut full = vec![0.0; input];
        full[..d].copy_from_slice(&w[row * d..(row + 1) * d]);
        mono_params.extend(full);
    }
    mono_params.extend_from_slice(&c.params()[hidden[0] * d..]);
    let net = Mlp::from_params(MlpArch::scalar(input, &hidden), mono_params).unwrap();
    let mono = MonolithicCritic::from_net(layout, slots, net).unwrap();
    let h = HStructure::new(HKind::Singleton, layout, &hidden, &mut r);
    let critic = HcCritic::from_parts(h, c, 0.0);

    let policy = DeterministicPolicy::new(layout, &[8], &mut r);
    let recs = synthetic_records(&mut r, layout, 0, 12);
    let batch: Vec<&ReplayRecord> = recs.iter().collect();
    let a = hc_policy_gradient(&critic, &batch, &policy).unwrap();
    let b = monolithic_trajectory_gradient(&mono, &batch, &policy).unwrap();
    assert!(relative_error(&a, &b) < 1e-12);
}

#[test]
fn monolithic_rejects_long_segments() {
    let layout = FeatureLayout::new(1, 1, 4);
    let mono = MonolithicCritic::new(layout, 2, &[4], &mut rng(0));
    let seg: Vec<SegmentStep> = (0..3).map(|p| step(&[0.1], &[0.2], p)).collect();
    assert!(mono.value(&seg[..2]).is_ok());
    assert!(matches!(mono.value(&seg), Err(Error::InvalidInput(_))));
}

#[test]
fn monolithic_gradient_is_deterministic() {
    let layout = FeatureLayout::new(2, 2, 4);
    let make = || {
        let mut r = rng(8);
        let mono = MonolithicCritic::new(layout, 4, &[8], &mut r);
        let policy = DeterministicPolicy::new(layout, &[8], &mut r);
        let recs = synthetic_records(&mut r, layout, 0, 10);
        let batch: Vec<&ReplayRecord> = recs.iter().collect();
        monolithic_trajectory_gradient(&mono, &batch, &policy).unwrap()
    };
    assert_eq!(make(), make());
}

#[test]
fn sample_variance_examples() {
    let g = vec![1.0, -2.0, 0.5];
    let neg: Vec<f64> = g.iter().map(|x| -x).collect();
    let norm2: f64 = g.iter().map(|x| x * x).sum();
    assert!((summed_sample_variance(&[g.clone(), neg]).unwrap() - 2.0 * norm2).abs() < 1e-12);
    assert_eq!(summed_sample_variance(&[g.clone(), g.clone(), g.clone()]).unwrap(), 0.0);
    assert!(summed_sample_variance(std::slice::from_ref(&g)).is_err());
    assert!(summed_sample_variance(&[g, vec![1.0]]).is_err());
}

#[test]
fn soft_update_examples() {
    let layout = FeatureLayout::new(2, 2, 4);
    let mut r = rng(11);
    let mut critic = HcCritic::new(HKind::PairwiseK(1), layout, &[4], 0.0, &mut r);
    let start_c = critic.target_c.params().to_vec();
    critic.soft_update_targets(0.005).unwrap();
    critic.soft_update_targets(0.005).unwrap();
    assert_eq!(critic.target_c.params(), start_c.as_slice());

    let live = critic.flat_params();
    let perturbed: Vec<f64> = live.iter().map(|x| x + 1.0).collect();
    critic.set_flat_params(&perturbed);
    let dist = |c: &HcCritic| {
        let t: Vec<f64> = c.target_h.flat_params().into_iter().chain(c.target_c.params().iter().copied()).collect();
        c.flat_params().iter().zip(t).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let before = dist(&critic);
    critic.soft_update_targets(0.25).unwrap();
    assert!((dist(&critic) - 0.75 * before).abs() < 1e-12);
    critic.soft_update_targets(1.0).unwrap();
    assert!(dist(&critic) < 1e-15);
    assert!(critic.soft_update_targets(0.0).is_err());
    assert!(critic.soft_update_targets(1.5).is_err());
}

#[test]
fn snapshot_round_trip_is_exact() {
    let mut r = rng(13);
    let mut snap = ParamSnapshot::new();
    snap.insert("policy", &Mlp::new(MlpArch::new(3, &[8], 2, OutputActivation::Tanh), &mut r));
    snap.insert("critic.c", &Mlp::new(MlpArch::scalar(5, &[8, 8]), &mut r));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.params");
    snap.save(&path).unwrap();
    let back = ParamSnapshot::load(&path).unwrap();
    assert_eq!(back, snap);
    assert!(back.require("critic.h0").is_err());

    let mut bytes = std::fs::read(&path).unwrap();
    let n = bytes.len();
    bytes[n - 3] ^= 0x40;
    assert!(matches!(ParamSnapshot::read_from(bytes.as_slice()), Err(Error::Checksum(_))));
    let mut bytes = std::fs::read(&path).unwrap();
    bytes.push(0);
    assert!(ParamSnapshot::read_from(bytes.as_slice()).is_err());
}
