use std::process::{Command, Output};

use serde_json::Value;

fn forge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qubus-forge"))
        .args(args)
        .env_remove("QUBUS_FORGE_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn all_numbers_finite(v: &Value) -> bool {
    match v {
        Value::Number(n) => n.as_f64().is_some_and(f64::is_finite),
        Value::Array(xs) => xs.iter().all(all_numbers_finite),
        Value::Object(m) => m.values().all(all_numbers_finite),
        _ => true,
    }
}

const GENERATE: &[&str] =
    &["generate", "--n", "3", "--m-parties", "2", "--shifts", "0,1", "--balanced", "--theta", "0.01", "--alpha", "500"];

#[test]
fn generate_reports_success_and_fidelity() {
    let out = forge(GENERATE);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!((v["success_prob"].as_f64().unwrap() - 1.0 / 9.0).abs() < 1e-8);
    assert!(v["fidelity"].as_f64().unwrap() >= 1.0 - 1e-9);
    assert_eq!(v["stages"].as_array().unwrap().len(), 2);
    assert!(all_numbers_finite(&v));
}

#[test]
fn output_is_deterministic() {
    let a = forge(GENERATE);
    let b = forge(GENERATE);
    assert_eq!(a.stdout, b.stdout);
    let sweep = ["sweep", "--alpha", "1,100", "--theta", "0.01,0.1", "--eta", "0.7,1", "--format", "csv"];
    let serial = Command::new(env!("CARGO_BIN_EXE_qubus-forge"))
        .args(sweep)
        .env("QUBUS_FORGE_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(serial.stdout, forge(&sweep).stdout);
}

#[test]
fn dump_state_includes_terms() {
    let mut args = GENERATE.to_vec();
    args.push("--dump-state");
    let v = json(&forge(&args));
    assert_eq!(v["final_state"]["terms"].as_array().unwrap().len(), 3);
    assert!(all_numbers_finite(&v));
}

#[test]
fn prepare_and_verify_basis() {
    let v = json(&forge(&["prepare", "--n", "4"]));
    assert!(all_numbers_finite(&v));
    let out = forge(&["verify-basis", "--n", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(all_numbers_finite(&v));
    assert_eq!(v["passed"], Value::Bool(true));
}

#[test]
fn config_errors_exit_two() {
    for args in [
        &["generate", "--bogus"][..],
        &["generate", "--n", "three"],
        &["generate", "--n", "3", "--shifts", "0,7"],
        &["sweep", "--alpha", "1", "--theta", "0.1", "--eta", "1.5"],
        &["prepare", "--n", "3", "--format", "csv"],
        &["verify-basis", "--n", "12"],
    ] {
        let out = forge(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    }
    let out = Command::new(env!("CARGO_BIN_EXE_qubus-forge"))
        .args(["sweep", "--alpha", "1", "--theta", "0.1"])
        .env("QUBUS_FORGE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_herald_exits_three() {
    let out = forge(&["generate", "--n", "3", "--shifts", "0,1", "--coeffs", "1,0,0;1,0,0"]);
    assert_eq!(out.status.code(), Some(3));
    let v = json(&out);
    assert_eq!(v["failed_stage"], 1);
}

#[test]
fn dump_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = GENERATE.to_vec();
    args.extend(["--eta", "0.7", "--norm-mode", "orthogonal_approx", "--dump-config"]);
    let dumped = forge(&args);
    assert_eq!(dumped.status.code(), Some(0));
    let path = dir.path().join("run.conf");
    std::fs::write(&path, &dumped.stdout).unwrap();
    let path = path.to_str().unwrap();
    let again = forge(&["--config", path, "--dump-config"]);
    assert_eq!(dumped.stdout, again.stdout);
    let mut direct = GENERATE.to_vec();
    direct.extend(["--eta", "0.7", "--norm-mode", "orthogonal_approx"]);
    assert_eq!(forge(&["--config", path]).stdout, forge(&direct).stdout);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    std::fs::write(&path, "command = generate\nn = 3\nshifts = 0,1\nalpha = 1\n").unwrap();
    let path = path.to_str().unwrap();
    let from_file = json(&forge(&["--config", path]));
    let overridden = json(&forge(&["--config", path, "generate", "--alpha", "500"]));
    let err = |v: &Value| v["error_prob_total"].as_f64().unwrap();
    assert!(err(&overridden) < 1e-4);
    assert!(err(&from_file) > 0.1);
}

#[test]
fn sweep_writes_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let out = forge(&[
        "sweep", "--alpha", "100,500", "--theta", "0.001,0.01", "--eta", "0.7,1", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("alpha,theta,eta,mean_k1,mean_k2,p_err_closed,p_err_sim"));
    let rows: Vec<Vec<f64>> =
        lines.map(|l| l.split(',').map(|x| x.parse::<f64>().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 8);
    for r in &rows {
        assert!(r.iter().all(|x| x.is_finite()));
        let (closed, sim) = (r[5], r[6]);
        assert!((closed - sim).abs() <= 1e-10 * closed.max(f64::MIN_POSITIVE), "{r:?}");
    }
}
