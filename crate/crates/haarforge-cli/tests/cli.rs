use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn haarforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_haarforge"))
        .args(args)
        .env("HAARFORGE_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn rows(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).expect("stdout rows are JSON"))
        .collect()
}

fn strip_wall_time(text: &str) -> Vec<Value> {
    text.lines()
        .map(|l| {
            let mut v: Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("wall_time_s");
            v
        })
        .collect()
}

#[test]
fn selftest_passes() {
    let out = haarforge(&["selftest"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(rows(&out).iter().all(|r| r["value"] == 1.0));
}

#[test]
fn theta_for_two_generators() {
    let out = haarforge(&["theta", "--m", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let theta = rows(&out)[0]["value"].as_f64().unwrap();
    let expect = 2.404825557695773 / 2f64.sqrt();
    assert!((theta - expect).abs() < 1e-6, "{theta} vs {expect}");
}

#[test]
fn diagram_rank_is_bell_four() {
    let out = haarforge(&["diagram", "--k", "2", "--check", "rank"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(rows(&out)[0]["value"], 15.0);
}

#[test]
fn diagram_checks_pass_at_stable_n() {
    for check in ["mult", "mobius", "projector"] {
        let out = haarforge(&["diagram", "--k", "2", "--n", "4", "--check", check]);
        assert_eq!(out.status.code(), Some(0), "{check}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(haarforge(&["--bogus", "selftest"]).status.code(), Some(2));
    assert_eq!(haarforge(&["nonsense"]).status.code(), Some(2));
    assert_eq!(haarforge(&["markov", "--suite", "other"]).status.code(), Some(2));
    assert_eq!(haarforge(&["freeness", "--grid", "ell=3"]).status.code(), Some(2));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(haarforge(&["--help"]).status.code(), Some(0));
    let v = haarforge(&["--version"]);
    assert_eq!(v.status.code(), Some(0));
}

#[test]
fn below_stable_range_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = haarforge(&["diagram", "--k", "2", "--n", "3", "--check", "mult", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let diag: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("diagnostic.json")).unwrap()).unwrap();
    assert_eq!(diag["error"], "config");
    assert!(diag["message"].as_str().unwrap().contains("stable range"));
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn config_errors_name_the_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    write(&cfg, r#"{"N": 8, "colour": "red", "k": "two"}"#);
    let out = haarforge(&["--config", cfg.to_str().unwrap(), "selftest"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("colour"), "{err}");

    write(&cfg, r#"{"k": "two"}"#);
    let out = haarforge(&["--config", cfg.to_str().unwrap(), "selftest"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k (expected"));

    write(&cfg, "not json");
    assert_eq!(haarforge(&["--config", cfg.to_str().unwrap(), "selftest"]).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(haarforge(&["--config", missing.to_str().unwrap(), "selftest"]).status.code(), Some(2));
}

#[test]
fn config_values_reach_the_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    write(&cfg, r#"{"N": 6, "k": 1, "ell": 2, "seed": 9, "samples": 64}"#);
    let out = haarforge(&["--config", cfg.to_str().unwrap(), "frame-potential", "--ensemble", "phased"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = &rows(&out)[0];
    assert_eq!(r["config"]["N"], 6);
    assert_eq!(r["config"]["k"], 1);
    assert_eq!(r["n_samples"], 64);
    assert_eq!(r["seed"], 9);
    // flags override the file
    let out = haarforge(&["--config", cfg.to_str().unwrap(), "--seed", "3", "frame-potential", "--ensemble", "phased", "--n", "5"]);
    let r = &rows(&out)[0];
    assert_eq!(r["config"]["N"], 5);
    assert_eq!(r["seed"], 3);
}

#[test]
fn outputs_and_manifest_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = haarforge(&["--out", out_dir.to_str().unwrap(), "--seed", "5", "markov", "--suite", "classic", "--trials", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert!(manifest["version"].as_str().unwrap().starts_with('v'));
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(manifest["finished_unix"].as_f64().unwrap() >= manifest["started_unix"].as_f64().unwrap());
    let csv = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert!(csv.starts_with("experiment,metric,value,std_error,n_samples,config_hash,seed,config"));
    let jsonl = std::fs::read_to_string(out_dir.join("records.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 1);
    let rec: Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
    assert_eq!(rec["config_hash"], manifest["config_hash"]);

    let csv_only = dir.path().join("csv");
    haarforge(&["--out", csv_only.to_str().unwrap(), "--format", "csv", "selftest"]);
    assert!(csv_only.join("summary.csv").exists());
    assert!(!csv_only.join("records.jsonl").exists());
}

#[test]
fn reruns_are_identical_apart_from_timing() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let d = dir.path().join(name);
        let out = Command::new(env!("CARGO_BIN_EXE_haarforge"))
            .args(["--out", d.to_str().unwrap(), "--seed", "11", "--samples", "300", "--grid", "N=8;ell=1,2"])
            .arg("design-report")
            .env("HAARFORGE_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let jsonl = std::fs::read_to_string(d.join("records.jsonl")).unwrap();
        (strip_wall_time(&jsonl), std::fs::read_to_string(d.join("summary.csv")).unwrap())
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "3");
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn config_hash_tracks_inputs() {
    let hash = |args: &[&str]| rows(&haarforge(args))[0]["config_hash"].as_str().unwrap().to_string();
    let h1 = hash(&["theta", "--m", "3"]);
    assert_eq!(h1, hash(&["theta", "--m", "3"]));
    assert_ne!(h1, hash(&["theta", "--m", "4"]));
    assert_ne!(h1, hash(&["--seed", "1", "theta", "--m", "3"]));
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_haarforge"))
        .arg("selftest")
        .env("HAARFORGE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn domain_errors_exit_two() {
    let out = haarforge(&["lindeberg", "--weights", "1.0", "--k", "9", "--samples", "4"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"error\":\"library\""));
    assert_eq!(haarforge(&["moments", "--ensemble", "v", "--exact"]).status.code(), Some(2));
}
