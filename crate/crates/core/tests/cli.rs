use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};

use mmwave_ho::harness::csv_io::{read_metrics, read_summary};
use mmwave_ho::harness::{PolicyKind, SimConfig};

fn bin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmwave-ho")).args(args).current_dir(dir).output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stdout:\n{}\nstderr:\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
}

fn small_config(dir: &Path) {
    let mut cfg = SimConfig::default();
    cfg.learning.episodes = 300;
    cfg.experiment.replications = 6;
    cfg.skeleton.tune_episodes = 10;
    std::fs::write(dir.join("s.toml"), cfg.to_toml_string()).unwrap();
}

#[test]
fn train_then_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_config(d);
    ok(&bin(&["train", "--config", "s.toml", "--seed", "4", "--t-d", "3", "-o", "q.bin"], d));
    assert!(d.join("q.bin.json").exists());
    ok(&bin(
        &["evaluate", "--config", "s.toml", "--seed", "4", "--policy-file", "q.bin", "-o", "m.csv", "--summary", "s.csv"],
        d,
    ));
    for f in ["m.csv", "s.csv", "s.profile.csv", "s.histogram.csv"] {
        assert!(d.join(f).exists(), "{f} missing");
    }
    let rows = read_metrics(std::fs::File::open(d.join("m.csv")).unwrap()).unwrap();
    let summary = read_summary(std::fs::File::open(d.join("s.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 4 * 6 * 51);
    assert_eq!(summary.len(), 4);

    // Recompute the summary from the per-location rows.
    let mut traj: HashMap<(PolicyKind, u64), (f64, u32)> = HashMap::new();
    for r in &rows {
        let e = traj.entry((r.policy, r.replication)).or_default();
        e.0 += r.rate_bps;
        e.1 += r.handover_flag as u32;
    }
    for s in &summary {
        let per: Vec<_> = traj.iter().filter(|(k, _)| k.0 == s.policy).map(|(_, v)| *v).collect();
        assert_eq!(per.len(), 6);
        let mean = per.iter().map(|v| v.0).sum::<f64>() / 6.0;
        let ho = per.iter().map(|v| v.1 as f64).sum::<f64>() / 6.0;
        assert!((mean - s.mean_r_traj_bps).abs() <= 1e-6 * mean.max(1.0), "{:?}", s.policy);
        assert!((ho - s.mean_handovers).abs() < 1e-12, "{:?}", s.policy);
    }
}

#[test]
fn evaluate_subset_and_fixed_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_config(d);
    let out = bin(
        &["evaluate", "--config", "s.toml", "--seed", "2", "--policy", "multi-connectivity,smart-ucb", "--t-d", "1.5", "-o", "m.csv"],
        d,
    );
    ok(&out);
    let rows = read_metrics(std::fs::File::open(d.join("m.csv")).unwrap()).unwrap();
    assert!(rows.iter().all(|r| matches!(r.policy, PolicyKind::MultiConnectivity | PolicyKind::SmartUcb)));
    assert_eq!(rows.len(), 2 * 6 * 51);
}

#[test]
fn tune_and_validate_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_config(d);
    let out = bin(&["tune-threshold", "--config", "s.toml", "--episodes", "10"], d);
    ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    let t: f64 = text.lines().next().unwrap().trim_start_matches("T_D* = ").parse().unwrap();
    assert!(t >= 0.0);
    let out = bin(&["validate"], d);
    ok(&out);
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn sweep_writes_one_row_per_policy_and_value() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_config(d);
    ok(&bin(&["sweep", "--config", "s.toml", "--t-ho", "30,40", "--replications", "2", "--episodes", "50", "-o", "w.csv"], d));
    let text = std::fs::read_to_string(d.join("w.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 4);
    assert!(text.starts_with("parameter,value,policy,mean_Rtraj_bps,std_Rtraj_bps,mean_handovers"));
}

#[test]
fn bad_input_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.toml"), "[scenario]\ndensity = -3.0\n").unwrap();
    let out = bin(&["evaluate", "--config", "bad.toml", "--seed", "1", "-o", "m.csv"], d);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("density"));
    let out = bin(&["evaluate", "--seed", "1", "--policy-file", "missing.bin", "-o", "m.csv"], d);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_round_trips_through_toml() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = bin(&["config", "--seed", "9"], d);
    ok(&out);
    std::fs::write(d.join("c.toml"), &out.stdout).unwrap();
    let cfg = SimConfig::load(&d.join("c.toml")).unwrap();
    assert_eq!(cfg.experiment.seed, 9);
    let again = bin(&["config", "--config", "c.toml"], d);
    assert_eq!(again.stdout, out.stdout);
}
