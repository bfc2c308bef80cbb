use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cusplab(args: &[&str], env_output: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cusplab"));
    cmd.args(args).env_remove("CUSPLAB_OUTPUT");
    if let Some(dir) = env_output {
        cmd.env("CUSPLAB_OUTPUT", dir);
    }
    cmd.output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn thresholds_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("t");
    let out = cusplab(
        &["thresholds", "--d", "2", "--theta", "0.5", "--p0", "4", "--alpha0", "0.9", "--output", o.to_str().unwrap()],
        None,
    );
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    for (k, want) in [("r1", 20.0), ("r2", 15.0), ("q1", 20.0 / 11.0), ("q2", 1.5 / 1.35)] {
        assert!((v[k].as_f64().unwrap() - want).abs() < 1e-12, "{k}");
    }
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(o.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "thresholds");
    assert_eq!(manifest["files"][0]["path"], "thresholds.json");
    assert_eq!(manifest["input_hashes"]["config"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["config"]["thresholds"]["alpha0"], 0.9);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    let out = cusplab(&["solve", "--h0", "0.9", "--output", o], None);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
    assert_eq!(err["exit_code"], 2);
    assert_eq!(cusplab(&["no-such-command"], None).status.code(), Some(2));
    assert_eq!(cusplab(&["thresholds", "--theta", "2", "--output", o], None).status.code(), Some(2));
    // The log profile has no finite σ(R0), so surface quadrature refuses it.
    let out = cusplab(&["verify-surface", "--profile", "log", "--output", o], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn suite_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gn.json");
    // r beyond where x₂^λ has an integrable gradient on Ω₂: the suite must report failure.
    std::fs::write(&cfg, r#"{"command":"verify-gn","gn":{"r_values":[7.0]}}"#).unwrap();
    let out = cusplab(&["verify-gn", "--config", cfg.to_str().unwrap(), "--output", dir.path().join("o").to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_json(&out)["passed"], false);
}

#[test]
fn environment_overrides_output() {
    let dir = tempfile::tempdir().unwrap();
    let flag = dir.path().join("flag");
    let env = dir.path().join("env");
    let out = cusplab(&["thresholds", "--output", flag.to_str().unwrap()], Some(&env));
    assert_eq!(out.status.code(), Some(0));
    assert!(env.join("manifest.json").exists());
    assert!(!flag.exists());
}

#[test]
fn solve_then_probe() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("solve");
    let p = dir.path().join("probe");
    let out = cusplab(&["solve", "--case", "smooth_bulk", "--levels", "6", "--output", s.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout_json(&out)["error_norms"]["l2"].as_f64().unwrap() < 0.01);
    let out = cusplab(&["probe", "--input", s.to_str().unwrap(), "--output", p.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(p.join("probe_gradient.csv")).unwrap();
    assert!(csv.starts_with("ring_radius,mass_region1,mass_region2\n"));
    assert!(csv.lines().count() >= 6);
    let v = stdout_json(&out);
    assert!(v["gradient"]["both"]["s"].as_f64().unwrap() <= 0.05);
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(p.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["input_hashes"]["mesh.txt"].as_str().unwrap().len(), 64);
}

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("o");
    let args = ["sweep", "--jobs", "3", "--thetas", "0.5,1", "--contrasts", "1,10", "--sweep-levels", "6", "--output", o.to_str().unwrap()];
    let read_all = || {
        let mut names: Vec<_> = std::fs::read_dir(&o).unwrap().map(|e| e.unwrap().path()).collect();
        names.sort();
        names.iter().map(|p| (p.clone(), std::fs::read(p).unwrap())).collect::<Vec<_>>()
    };
    assert_eq!(cusplab(&args, None).status.code(), Some(0));
    let first = read_all();
    assert_eq!(cusplab(&args, None).status.code(), Some(0));
    assert_eq!(first, read_all());
    assert!(first.iter().any(|(p, _)| p.ends_with("sweep.csv")));
}

#[test]
fn verification_suites_pass() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["verify-geometry", "verify-surface", "verify-gn"] {
        let o = dir.path().join(cmd);
        let out = cusplab(&[cmd, "--profile", "power:0.5", "--output", o.to_str().unwrap()], None);
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stdout));
    }
}
