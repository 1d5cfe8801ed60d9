use std::fs;
use std::path::Path;
use std::process::Command;

use udn_core::config::{ExperimentConfig, Method};
use udn_core::experiments::{
    normalize_trace, read_throughput, run_experiment, topology_seed, write_throughput, Scenario,
};

fn udn(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_udn"))
        .args(args)
        .output()
        .expect("binary runs")
}

const TINY: &[&str] = &[
    "--drops", "2", "--episodes", "2", "--steps-per-episode", "10", "--eval-window", "5",
    "--hidden", "8,8", "--minibatch", "4", "--num-users", "3", "--num-aps", "4",
    "--user-counts", "2,3", "--threads", "2",
];

fn run_in(dir: &Path, sub: &str, extra: &[&str]) -> std::process::Output {
    let mut args = vec![sub, "--out", dir.to_str().unwrap()];
    args.extend_from_slice(TINY);
    args.extend_from_slice(extra);
    udn(&args)
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn every_command_is_byte_reproducible() {
    for (sub, files) in [
        ("train", &["trace.csv", "throughput.csv", "summary.csv"][..]),
        ("sweep", &["throughput.csv", "summary.csv"][..]),
        ("baseline", &["throughput.csv", "summary.csv"][..]),
        ("oracle", &["throughput.csv", "summary.csv"][..]),
    ] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let extra: &[&str] = if sub == "oracle" { &["--num-users", "2", "--num-aps", "2"] } else { &[] };
        for d in [&a, &b] {
            let out = run_in(d.path(), sub, extra);
            assert!(out.status.success(), "{sub}: {}", String::from_utf8_lossy(&out.stderr));
        }
        for f in files {
            assert_eq!(read(a.path(), f), read(b.path(), f), "{sub}/{f}");
        }
    }
}

#[test]
fn seed_changes_results() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(run_in(a.path(), "baseline", &["--seed", "1"]).status.success());
    assert!(run_in(b.path(), "baseline", &["--seed", "2"]).status.success());
    assert_ne!(read(a.path(), "throughput.csv"), read(b.path(), "throughput.csv"));
}

#[test]
fn train_writes_trace_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "train", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = String::from_utf8(read(dir.path(), "trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("episode,reward,normalized_reward"));
    let normalized: Vec<f64> = lines
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(normalized.len(), 2);
    assert!(normalized.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(normalized.contains(&1.0));
    for d in 0..2 {
        for agent in 0..3 {
            assert!(dir.path().join(format!("models/drop_{d}/agent_{agent:02}.qnet")).exists());
        }
    }

    let resumed = tempfile::tempdir().unwrap();
    let init = dir.path().join("models/drop_0");
    let out = run_in(resumed.path(), "train", &["--init-from", init.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(udn(&["baseline", "--out", d, "--k-max", "zero"]).status.code(), Some(1));
    assert_eq!(udn(&["baseline", "--out", d, "--discount", "1.5"]).status.code(), Some(1));
    assert_eq!(udn(&["baseline", "--out", d, "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(udn(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(udn(&["--help"]).status.code(), Some(0));
    let missing = dir.path().join("missing.cfg");
    assert_eq!(
        udn(&["baseline", "--out", d, "--config", missing.to_str().unwrap()]).status.code(),
        Some(1)
    );
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let nested = blocker.join("out");
    assert_eq!(
        udn(&["baseline", "--drops", "1", "--out", nested.to_str().unwrap()]).status.code(),
        Some(2)
    );
    let bad = udn(&["baseline", "--out", d, "--los-probability", "2"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("los_probability"));
}

#[test]
fn config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    fs::write(&cfg_path, "# tiny run\ndrops = 2\nuser_counts = 2,3\nseed = 7\n").unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let out = udn(&["baseline", "--config", cfg_path.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert!(out.status.success());
    let out = udn(&[
        "baseline", "--drops", "2", "--user-counts", "2,3", "--seed", "7", "--out", b.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(read(&a, "throughput.csv"), read(&b, "throughput.csv"));
    let echoed = fs::read_to_string(a.join("config.txt")).unwrap();
    let parsed = ExperimentConfig::parse_kv(&echoed).unwrap();
    assert_eq!(parsed.seed, 7);
    assert_eq!(parsed.user_counts, vec![2, 3]);
}

#[test]
fn throughput_csv_parses_back() {
    let mut cfg = ExperimentConfig::default();
    cfg.drops = 3;
    let scenarios = [Scenario::new(2, 10, 4, 4), Scenario::new(4, 10, 4, 4)];
    let record = run_experiment(&cfg, &scenarios, &[Method::MaxRsrp, Method::Random]).unwrap();
    assert_eq!(record.rows.len(), 12);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("throughput.csv");
    write_throughput(&path, &record).unwrap();
    let back = read_throughput(&path).unwrap();
    assert_eq!(back.len(), record.rows.len());
    for (r, b) in record.rows.iter().zip(&back) {
        assert_eq!((r.drop, r.method, r.scenario), (b.drop, b.method, b.scenario));
        assert_eq!(r.total_bps, b.total_bps);
        assert_eq!(r.avg_user_bps, b.avg_user_bps);
        assert!((b.avg_user_bps * b.scenario.num_users as f64 - b.total_bps).abs() <= 1e-6 * b.total_bps.max(1.0));
    }
}

#[test]
fn topologies_are_shared_across_methods() {
    let s = Scenario::new(4, 10, 4, 4);
    let cfg = ExperimentConfig::default();
    let a = udn_core::experiments::run_drop::<f64>(&cfg, s, 0, Method::MaxRsrp, None).unwrap().0;
    let b = udn_core::experiments::run_drop::<f64>(&cfg, s, 0, Method::Random, None).unwrap().0;
    assert_eq!(a.scenario, b.scenario);
    assert_eq!(
        topology_seed(cfg.seed, &s, 0),
        topology_seed(cfg.seed, &Scenario::new(4, 10, 1, 1), 0)
    );
}

#[test]
fn normalized_trace_peaks_at_one() {
    let t = [3.0, 9.0, 4.5, 0.0];
    let n = normalize_trace(&t);
    assert_eq!(n.iter().cloned().fold(f64::MIN, f64::max), 1.0);
    assert_eq!(n, vec![1.0 / 3.0, 1.0, 0.5, 0.0]);
}
