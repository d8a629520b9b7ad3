use std::path::Path;
use std::process::{Command, Output};

fn drmdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drmdp")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn fixtures_prints_expected_vs_computed() {
    let out = drmdp(&["fixtures", "--name", "xor-policy-class"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().next().unwrap(), "quantity,expected,computed,passed");
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
    assert!(!drmdp(&["fixtures", "--name", "nope"]).status.success());
}

#[test]
fn verify_counterexamples_reports_the_bias_line() {
    let out = drmdp(&["verify", "--suite", "counterexamples"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.contains("gamma=0.5 vanilla greedy J: computed -0.247500000000")));
    assert!(text.lines().all(|l| !l.starts_with("FAIL")));
    assert!(!drmdp(&["verify", "--suite", "everything"]).status.success());
}

#[test]
fn train_then_heatmap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = include_str!("../../../configs/point-reach-hc.toml")
        .replace("env_steps = 50000", "env_steps = 600")
        .replace("start_steps = 2000", "start_steps = 200")
        .replace("eval_every = 1000", "eval_every = 300");
    let cfg_path = dir.path().join("run.toml");
    std::fs::write(&cfg_path, cfg).unwrap();
    let out_dir = dir.path().join("out");
    let out = drmdp(&[
        "train",
        "--config",
        cfg_path.to_str().unwrap(),
        "--seed",
        "5",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let seed_dir = out_dir.join("seed-5");
    let metrics = std::fs::read_to_string(seed_dir.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 3);

    let csv = dir.path().join("heat.csv");
    let snap = seed_dir.join("final.params");
    let out = drmdp(&["heatmap", "--snapshot", snap.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let grid = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(grid.lines().count(), 10);
    assert!(grid.lines().all(|l| l.split(',').count() == 10));
}

#[test]
fn bad_inputs_exit_nonzero() {
    let missing = Path::new("/nonexistent/run.toml");
    assert!(!drmdp(&["train", "--config", missing.to_str().unwrap(), "--seed", "0"]).status.success());
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.toml");
    std::fs::write(&cfg_path, "seeds = [0]\nunknown = 1\n").unwrap();
    assert!(!drmdp(&["train", "--config", cfg_path.to_str().unwrap(), "--seed", "0"]).status.success());
    let junk = dir.path().join("junk.params");
    std::fs::write(&junk, "not a snapshot").unwrap();
    let out = dir.path().join("h.csv");
    assert!(!drmdp(&["heatmap", "--snapshot", junk.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
}
