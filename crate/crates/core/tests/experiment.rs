use drmdp_core::approx::ParamSnapshot;
use drmdp_core::experiment::{
    ircr_baseline_train, rap, read_metrics_csv, train, write_metrics_csv, write_outcome, Algorithm, IrcrRedistributor,
    MetricsRow, ReplayBuffer, ReplayRecord, RunConfig, SegmentStep, METRICS_HEADER,
};
use drmdp_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const HC_CONFIG: &str = include_str!("../../../configs/point-reach-hc.toml");

fn short_config() -> RunConfig {
    let mut cfg = RunConfig::desk();
    cfg.train.env_steps = 1_500;
    cfg.train.start_steps = 300;
    cfg.train.eval_every = 500;
    cfg.train.batch_size = 16;
    cfg.critic.hidden = vec![16];
    cfg.actor.hidden = vec![16];
    cfg
}

fn rec(id: usize, phase: usize, interval_end: bool, reward: f64) -> ReplayRecord {
    ReplayRecord {
        segment: (0..=phase).map(|p| SegmentStep { obs: vec![id as f64], action: vec![0.0], phase: p }).collect(),
        prefix_len: 0,
        reward,
        next_obs: vec![0.0],
        interval_end,
        terminal: false,
        behavior_id: 0,
        episode: 0,
        step: id,
    }
}

#[test]
fn rap_examples() {
    assert_eq!(rap(&[3.0, -2.0], &[3.0, -2.0], &[false, false]).unwrap(), 1.0);
    assert_eq!(rap(&[50.0, 100.0], &[100.0, 100.0], &[false, false]).unwrap(), 0.75);
    // Offset applies to both terms of the ratio.
    assert_eq!(rap(&[-50.0], &[0.0], &[true]).unwrap(), 0.0);
    assert!(matches!(rap(&[-10.0], &[-50.0], &[true]), Err(Error::InvalidInput(_))));
    assert!(rap(&[1.0], &[0.0], &[false]).is_err());
    assert!(rap(&[1.0, 2.0], &[1.0], &[false]).is_err());
    assert!(rap(&[], &[], &[]).is_err());
}

#[test]
fn buffer_evicts_fifo() {
    let mut buf = ReplayBuffer::new(3).unwrap();
    for i in 0..5 {
        buf.push(rec(i, 0, true, 0.0));
        assert_eq!(buf.len(), (i + 1).min(3));
    }
    let steps: Vec<usize> = buf.iter().map(|r| r.step).collect();
    assert_eq!(steps, [2, 3, 4]);
    assert_eq!(buf.capacity(), 3);
    assert!(ReplayBuffer::new(0).is_err());

    let mut a = ChaCha8Rng::seed_from_u64(3);
    let mut b = ChaCha8Rng::seed_from_u64(3);
    let sa: Vec<usize> = buf.sample(&mut a, 10).iter().map(|r| r.step).collect();
    let sb: Vec<usize> = buf.sample(&mut b, 10).iter().map(|r| r.step).collect();
    assert_eq!(sa, sb);
    assert!(sa.iter().all(|s| (2..5).contains(s)));
}

#[test]
fn record_successor_bookkeeping() {
    let mut r = rec(0, 2, false, 0.0);
    assert_eq!(r.phase(), 2);
    assert_eq!(r.next_phase(), 3);
    assert_eq!(r.history().len(), 2);
    assert_eq!(r.next_history(1).len(), 3);
    r.interval_end = true;
    assert_eq!(r.next_phase(), 0);
    assert_eq!(r.next_history(0).len(), 0);
    assert_eq!(r.next_history(2).len(), 2);
    assert!(r.validate(0).is_ok());
    r.prefix_len = 1;
    assert!(r.validate(0).is_err());
}

#[test]
fn ircr_guidance_with_constant_dense_reward() {
    // Sum over an interval of n steps with r̂ ≡ 1.5 pays n·1.5, copied to every step.
    let n = 4;
    let mut red = IrcrRedistributor::new();
    for phase in 0..n - 1 {
        assert!(red.push(rec(phase, phase, false, 0.0)).is_empty());
    }
    assert_eq!(red.pending(), n - 1);
    let out = red.push(rec(n - 1, n - 1, true, n as f64 * 1.5));
    assert_eq!(out.len(), n);
    assert!(out.iter().all(|r| r.reward == 6.0));
    assert_eq!(out.iter().map(|r| r.step).collect::<Vec<_>>(), [0, 1, 2, 3]);
    assert_eq!(red.pending(), 0);
}

#[test]
fn shipped_config_parses_and_matches_desk_defaults() {
    let cfg = RunConfig::from_toml(HC_CONFIG).unwrap();
    let desk = RunConfig::desk();
    assert_eq!(cfg.env, desk.env);
    assert_eq!(cfg.train, desk.train);
    assert_eq!(cfg.critic, desk.critic);
    assert_eq!(cfg.critic.algorithm, Algorithm::Hc);
}

#[test]
fn unknown_or_missing_keys_are_errors() {
    let extra = HC_CONFIG.replace("[actor]", "[actor]\ndropout = 0.1");
    assert!(matches!(RunConfig::from_toml(&extra), Err(Error::Parse(_))));
    let missing = HC_CONFIG.replace("lambda = 0.05\n", "");
    assert!(matches!(RunConfig::from_toml(&missing), Err(Error::Parse(_))));
    let bad = HC_CONFIG.replace("batch_size = 64", "batch_size = 0");
    assert!(matches!(RunConfig::from_toml(&bad), Err(Error::InvalidConfig(_))));
    let bad = HC_CONFIG.replace("lambda = 0.05", "lambda = -1.0");
    assert!(RunConfig::from_toml(&bad).is_err());
    let bad = HC_CONFIG.replace("\"singleton\"", "\"rnn\"");
    assert!(RunConfig::from_toml(&bad).is_err());
}

#[test]
fn metrics_csv_round_trip() {
    let rows = vec![
        MetricsRow {
            env_step: 1000,
            episodic_return: -3.5,
            steps_to_target: 120.0,
            td_loss: None,
            reg_loss: None,
            hc_variance: None,
            monolithic_variance: None,
        },
        MetricsRow {
            env_step: 2000,
            episodic_return: 1.0,
            steps_to_target: 25.0,
            td_loss: Some(0.25),
            reg_loss: Some(1.5),
            hc_variance: Some(0.1),
            monolithic_variance: Some(0.3),
        },
    ];
    let mut out = Vec::new();
    write_metrics_csv(&rows, &mut out).unwrap();
    let text = String::from_utf8(out.clone()).unwrap();
    assert_eq!(text.lines().next().unwrap(), METRICS_HEADER.join(","));
    assert_eq!(read_metrics_csv(out.as_slice()).unwrap(), rows);

    let reversed: Vec<MetricsRow> = rows.iter().rev().cloned().collect();
    let mut out = Vec::new();
    write_metrics_csv(&reversed, &mut out).unwrap();
    assert!(read_metrics_csv(out.as_slice()).is_err());
    assert!(read_metrics_csv("a,b\n1,2\n".as_bytes()).is_err());
}

#[test]
fn same_seed_gives_identical_metrics() {
    let cfg = short_config();
    let a = train(&cfg, 7).unwrap();
    let b = train(&cfg, 7).unwrap();
    let csv = |rows: &[MetricsRow]| {
        let mut out = Vec::new();
        write_metrics_csv(rows, &mut out).unwrap();
        out
    };
    assert_eq!(csv(&a.metrics), csv(&b.metrics));
    assert_eq!(a.final_snapshot, b.final_snapshot);
    assert_eq!(a.metrics.len(), 3);
    assert!(a.metrics.windows(2).all(|w| w[0].env_step < w[1].env_step));
    assert!(a.policy_updates > 0);
}

#[test]
fn zero_gradient_steps_leave_the_policy_alone() {
    let mut cfg = short_config();
    cfg.train.gradient_steps = 0;
    let out = train(&cfg, 2).unwrap();
    assert_eq!(out.policy_updates, 0);
    let mut short = cfg.clone();
    short.train.env_steps = 500;
    let initial = train(&short, 2).unwrap();
    assert_eq!(out.policy.net().params(), initial.policy.net().params());
    let first = &out.metrics[0];
    assert!(out.metrics.iter().all(|m| m.episodic_return == first.episodic_return && m.td_loss.is_none()));
}

#[test]
fn variance_probe_does_not_change_training() {
    let mut cfg = short_config();
    let plain = train(&cfg, 4).unwrap();
    cfg.train.variance_probe_every = 100;
    cfg.train.variance_batch = 8;
    let probed = train(&cfg, 4).unwrap();
    assert_eq!(plain.policy.net().params(), probed.policy.net().params());
    let last = probed.metrics.last().unwrap();
    assert!(last.hc_variance.unwrap() >= 0.0 && last.monolithic_variance.unwrap() >= 0.0);
}

#[test]
fn ircr_baseline_runs_and_reports_no_reg_loss() {
    let cfg = short_config();
    let a = ircr_baseline_train(&cfg, 1).unwrap();
    let b = ircr_baseline_train(&cfg, 1).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert!(a.metrics.iter().all(|m| m.reg_loss.is_none()));
    assert!(a.metrics.last().unwrap().td_loss.is_some());
    assert!(a.final_snapshot.get("critic.q").is_some());

    // The probe is an HC-only measurement; asking for it on the baseline is ignored.
    let mut probed = cfg.clone();
    probed.train.variance_probe_every = 100;
    probed.train.variance_batch = 8;
    let c = ircr_baseline_train(&probed, 1).unwrap();
    assert_eq!(c.metrics, a.metrics);
}

#[test]
fn outcome_files_are_written() {
    let mut cfg = short_config();
    cfg.train.snapshot_every = 1_000;
    let out = train(&cfg, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let seed_dir = write_outcome(&out, dir.path()).unwrap();
    assert_eq!(seed_dir, dir.path().join("seed-3"));
    let metrics = read_metrics_csv(std::fs::File::open(seed_dir.join("metrics.csv")).unwrap()).unwrap();
    assert_eq!(metrics, out.metrics);
    let snap = ParamSnapshot::load(&seed_dir.join("final.params")).unwrap();
    assert_eq!(snap, out.final_snapshot);
    for name in ["policy", "critic.c", "critic.h0"] {
        assert!(snap.get(name).is_some(), "{name}");
    }
    assert!(seed_dir.join("step-1000.params").exists());
    assert!(seed_dir.join("trace.csv").exists());
}

#[test]
fn dense_sum_environment_trains() {
    let mut cfg = short_config();
    cfg.env.kind = drmdp_core::experiment::EnvKind::PointReachDense;
    cfg.env.aggregation = Some("sum".into());
    cfg.env.interval_min = Some(4);
    cfg.env.overlap = Some(2);
    cfg.critic.structure = "pairwise-1".into();
    let out = train(&cfg, 0).unwrap();
    assert_eq!(out.metrics.len(), 3);
    assert!(out.final_snapshot.get("critic.h1").is_some());
}
