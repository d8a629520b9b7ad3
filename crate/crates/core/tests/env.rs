use drmdp_core::drmdp::IntervalLaw;
use drmdp_core::env::{
    export_heatmap, line_cell_mask, shortest_path_steps, wrap_delayed, write_heatmap_csv, write_trace_csv, Aggregation,
    DelayedEnv, DenseEnv, DenseStep, PointReachConfig, PointReachEnv, TraceRow,
};
use drmdp_core::approx::{DeterministicPolicy, FeatureLayout, Mlp, MlpArch};
use drmdp_core::Result;
use proptest::prelude::*;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Replays a fixed list of per-step rewards, then ends.
struct Scripted {
    rewards: Vec<f64>,
    t: usize,
}

impl Scripted {
    fn new(rewards: &[f64]) -> Self {
        Self { rewards: rewards.to_vec(), t: 0 }
    }
}

impl DenseEnv for Scripted {
    fn obs_dim(&self) -> usize {
        1
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> Vec<f64> {
        self.t = 0;
        vec![0.0]
    }

    fn step(&mut self, _action: &[f64], _rng: &mut dyn RngCore) -> Result<DenseStep> {
        let reward = self.rewards[self.t];
        self.t += 1;
        let done = self.t == self.rewards.len();
        Ok(DenseStep { obs: vec![self.t as f64], reward, terminal: done, done, clipped: false })
    }
}

fn run_episode<E: DelayedEnv>(env: &mut E) -> Vec<(f64, usize, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    env.reset(&mut rng);
    let mut out = Vec::new();
    loop {
        let tr = env.step(&[0.0], &mut rng).unwrap();
        out.push((tr.reward, tr.phase, tr.interval_end));
        if tr.done {
            return out;
        }
    }
}

fn desk() -> PointReachConfig {
    PointReachConfig::default()
}

#[test]
fn interval_in_band_three_without_reaching_pays_minus_seven() {
    let cfg = PointReachConfig { start: [7.0, 2.0], interval: 4, ..desk() };
    let mut env = PointReachEnv::new(cfg).unwrap();
    env.start_episode();
    let mut last = None;
    for _ in 0..4 {
        last = Some(env.advance(&[0.0, 0.3]).unwrap());
    }
    let tr = last.unwrap();
    assert!(tr.interval_end);
    assert_eq!(cfg.band(7.0), 3);
    assert_eq!(tr.reward, -7.0);
}

#[test]
fn reaching_mid_interval_ends_the_episode_without_penalty() {
    let cfg = PointReachConfig { start: [17.5, 10.0], ..desk() };
    let mut env = PointReachEnv::new(cfg).unwrap();
    env.start_episode();
    let first = env.advance(&[0.0, 0.0]).unwrap();
    assert!(!first.interval_end && !first.done);
    let tr = env.advance(&[1.0, 0.0]).unwrap();
    assert!(tr.interval_end && tr.terminal && tr.done);
    assert_eq!(tr.phase, 1);
    // Band 8 before the move: no −10 term once the target is reached.
    assert_eq!(tr.reward, 8.0);
}

#[test]
fn zero_action_stays_put_until_step_limit() {
    let cfg = desk();
    let mut env = PointReachEnv::new(cfg).unwrap();
    env.start_episode();
    let mut steps = 0;
    loop {
        let tr = env.advance(&[0.0, 0.0]).unwrap();
        steps += 1;
        assert_eq!(env.position(), cfg.start);
        if tr.done {
            assert!(!tr.terminal);
            break;
        }
    }
    assert_eq!(steps, cfg.step_limit);
    assert!(env.advance(&[0.0, 0.0]).is_err());
}

#[test]
fn out_of_range_actions_are_clipped_and_flagged() {
    let mut env = PointReachEnv::new(desk()).unwrap();
    env.start_episode();
    let tr = env.advance(&[3.0, -0.5]).unwrap();
    assert!(tr.clipped);
    assert_eq!(env.position(), [1.0, 0.0]);
    let tr = env.advance(&[0.5, 0.5]).unwrap();
    assert!(!tr.clipped);
    assert!(env.advance(&[f64::NAN, 0.0]).is_err());
}

#[test]
fn phases_cycle_through_interval() {
    let cfg = desk();
    let mut env = PointReachEnv::new(cfg).unwrap();
    env.start_episode();
    for t in 0..40 {
        let tr = env.advance(&[0.1, 0.1]).unwrap();
        assert_eq!(tr.phase, t % cfg.interval);
        assert_eq!(tr.interval_end, tr.phase + 1 == cfg.interval);
        if !tr.interval_end {
            assert_eq!(tr.reward, 0.0);
        }
    }
}

#[test]
fn shortest_path_geometry() {
    // Nearest target point from the origin is (18, 9).
    assert_eq!(shortest_path_steps(&desk()), (18.0f64.hypot(9.0)).ceil() as usize);
    assert_eq!(shortest_path_steps(&desk()), 21);
    let paper = PointReachConfig::paper();
    assert_eq!(shortest_path_steps(&paper), (90.0f64.hypot(45.0)).ceil() as usize);
    let inside = PointReachConfig { start: desk().target_center(), ..desk() };
    assert_eq!(shortest_path_steps(&inside), 0);
}

#[test]
fn sum_without_overlap_conserves_reward() {
    let rewards = [1.0, -2.0, 0.5, 3.0, 4.0, -1.0, 2.0];
    let mut env = wrap_delayed(Scripted::new(&rewards), Aggregation::Sum, IntervalLaw::fixed(3).unwrap(), 0).unwrap();
    let out = run_episode(&mut env);
    let paid: f64 = out.iter().map(|o| o.0).sum();
    assert_eq!(paid, rewards.iter().sum::<f64>());
    let phases: Vec<usize> = out.iter().map(|o| o.1).collect();
    assert_eq!(phases, [0, 1, 2, 0, 1, 2, 0]);
    assert_eq!(out.iter().filter(|o| o.2).count(), 3);
}

#[test]
fn sum_with_overlap_shifts_payment_by_c() {
    let rewards: Vec<f64> = (1..=20).map(f64::from).collect();
    let c = 5;
    let mut env = wrap_delayed(Scripted::new(&rewards), Aggregation::Sum, IntervalLaw::fixed(8).unwrap(), c).unwrap();
    let out = run_episode(&mut env);
    // Intervals [0,8), [8,16), [16,20) pay r̂ over [−5,3), [3,11), [11,15).
    let emitted: Vec<(usize, f64)> = out.iter().enumerate().filter(|(_, o)| o.2).map(|(t, o)| (t, o.0)).collect();
    let expect = |lo: usize, hi: usize| rewards[lo..hi].iter().sum::<f64>();
    assert_eq!(emitted, vec![(7, expect(0, 3)), (15, expect(3, 11)), (19, expect(11, 15))]);
    assert_eq!(env.dropped_tail(), (5, expect(15, 20)));
}

#[test]
fn max_aggregation_emits_once() {
    let mut env = wrap_delayed(Scripted::new(&[1.0, 5.0, 2.0]), Aggregation::Max, IntervalLaw::fixed(3).unwrap(), 0).unwrap();
    let out = run_episode(&mut env);
    assert_eq!(out, vec![(0.0, 0, false), (0.0, 1, false), (50.0, 2, true)]);
}

#[test]
fn overlap_requires_sum() {
    let law = IntervalLaw::fixed(3).unwrap();
    assert!(wrap_delayed(Scripted::new(&[1.0]), Aggregation::Max, law.clone(), 1).is_err());
    assert!(wrap_delayed(Scripted::new(&[1.0]), Aggregation::Square, law.clone(), 2).is_err());
    assert!(wrap_delayed(Scripted::new(&[1.0]), Aggregation::Sum, law, 2).is_ok());
    assert!("median".parse::<Aggregation>().is_err());
}

proptest! {
    #[test]
    fn sum_wrapper_conserves_any_episode(rewards in prop::collection::vec(-5.0f64..5.0, 1..40), lo in 1usize..4, extra in 0usize..4, seed in 0u64..1000) {
        let law = IntervalLaw::uniform(lo, lo + extra).unwrap();
        let mut env = wrap_delayed(Scripted::new(&rewards), Aggregation::Sum, law, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        env.reset(&mut rng);
        let mut paid = 0.0;
        let mut phase_expect = 0;
        loop {
            let tr = env.step(&[0.0], &mut rng).unwrap();
            prop_assert_eq!(tr.phase, phase_expect);
            phase_expect = if tr.interval_end { 0 } else { phase_expect + 1 };
            prop_assert!(tr.phase < lo + extra);
            paid += tr.reward;
            if tr.done { break; }
        }
        let total: f64 = rewards.iter().sum();
        prop_assert!((paid - total).abs() < 1e-9);
    }

    #[test]
    fn position_stays_on_grid(actions in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..120)) {
        let cfg = desk();
        let mut env = PointReachEnv::new(cfg).unwrap();
        env.start_episode();
        for (ax, ay) in actions {
            let tr = env.advance(&[ax, ay]).unwrap();
            let [x, y] = env.position();
            prop_assert!((0.0..=cfg.grid_size).contains(&x) && (0.0..=cfg.grid_size).contains(&y));
            prop_assert!(tr.obs.iter().all(|v| (0.0..=1.0).contains(v)));
            if tr.done { break; }
        }
    }

    #[test]
    fn interval_reward_ignores_visit_order(xs in prop::collection::vec(0.0f64..17.0, 8)) {
        // Teleport-free check: the band max over an interval does not depend on the order of
        // the pre-move positions.
        let cfg = desk();
        let forward = xs.iter().map(|&x| cfg.band(x)).max();
        let backward = xs.iter().rev().map(|&x| cfg.band(x)).max();
        prop_assert_eq!(forward, backward);
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assert!(sorted.windows(2).all(|w| cfg.band(w[0]) <= cfg.band(w[1])));
    }
}

#[test]
fn heatmap_of_constant_and_linear_b() {
    let cfg = desk();
    let layout = FeatureLayout::new(2, 2, cfg.interval);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let policy = DeterministicPolicy::new(layout, &[8], &mut rng);

    let arch = MlpArch::scalar(layout.step_dim(), &[]);
    let mut constant = Mlp::zeros(arch.clone());
    *constant.params_mut().last_mut().unwrap() = 2.5;
    let grid = export_heatmap(&constant, &cfg, &policy).unwrap();
    assert_eq!(grid.len(), 10);
    assert!(grid.iter().flatten().all(|&v| v == 2.5));

    // b = normalized x coordinate.
    let mut linear = Mlp::zeros(arch);
    linear.params_mut()[0] = 1.0;
    let grid = export_heatmap(&linear, &cfg, &policy).unwrap();
    for row in &grid {
        assert!(row.windows(2).all(|w| w[1] > w[0]));
    }
    let mut csv = Vec::new();
    write_heatmap_csv(&grid, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 10);
    assert!(text.lines().all(|l| l.split(',').count() == 10));

    let wrong = Mlp::zeros(MlpArch::scalar(3, &[]));
    assert!(export_heatmap(&wrong, &cfg, &policy).is_err());
}

#[test]
fn line_mask_covers_start_and_target_cells() {
    let cfg = desk();
    let mask = line_cell_mask(&cfg);
    assert!(mask[0][0]);
    assert!(mask[5][9] || mask[4][9]);
    assert!(!mask[9][0]);
    assert!(!mask[0][9]);
    let on = mask.iter().flatten().filter(|&&m| m).count();
    assert!(on > 10 && on < 50, "{on} cells on the line");
}

#[test]
fn trace_csv_has_fixed_header() {
    let rows = vec![TraceRow { t: 0, x: 1.0, y: 0.5, a_x: 1.0, a_y: 0.5, phase: 0, reward: 0.0, done: false }];
    let mut out = Vec::new();
    write_trace_csv(&rows, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,x,y,a_x,a_y,phase,R_t,done");
    assert_eq!(text.lines().count(), 2);
}
