//! End-to-end checks of the binary: flag parsing, exit-code taxonomy, and
//! machine-parsable output.

use std::path::PathBuf;
use std::process::{Command, Output};

const BENCHMARK: &str = r#"{"r": 1.0, "mu": -1.0, "sigma": 1.0, "nu": -0.3, "players": [{"k": 1.0}]}"#;
const GAME: &str = r#"{"r": 1.0, "mu": -1.0, "sigma": 1.0, "nu": -0.3, "rho": 2.0, "x_c": -10.0,
                       "players": [{"k": 1.0}, {"k": 1.0}]}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_goodwill"))
}

fn scenario_file(dir: &tempfile::TempDir, contents: &str) -> PathBuf {
    let path = dir.path().join("scenario.json");
    std::fs::write(&path, contents).unwrap();
    path
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

#[test]
fn solve_reports_the_benchmark_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario_file(&dir, BENCHMARK);
    let out = bin().args(["solve", "--scenario"]).arg(&path).output().unwrap();
    let payload = stdout_json(&out);
    let theta = payload["theta"].as_f64().unwrap();
    assert!((theta + 4.3605).abs() <= 1e-3, "theta = {theta}");
    assert!(payload["A"].is_f64() && payload["V_theta"].is_f64());
}

#[test]
fn sigma_override_reaches_the_deterministic_limit() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario_file(&dir, BENCHMARK);
    let out = bin()
        .args(["solve", "--scenario"])
        .arg(&path)
        .args(["--sigma-override", "0"])
        .output()
        .unwrap();
    let theta = stdout_json(&out)["theta"].as_f64().unwrap();
    assert!((theta + 4.0132).abs() <= 1e-3, "theta = {theta}");
}

#[test]
fn missing_scenario_file_is_a_usage_error() {
    let out = bin()
        .args(["solve", "--scenario", "/nonexistent/path.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/nonexistent/path.json"), "{err}");
}

#[test]
fn schema_violation_exits_one_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario_file(&dir, r#"{"mu": -1.0, "sigma": 1.0, "nu": -0.3, "players": [{"k": 1.0}]}"#);
    let out = bin().args(["solve", "--scenario"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`r`"));
}

#[test]
fn assumption_failure_exits_one_and_names_the_check() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario_file(
        &dir,
        r#"{"r": 1.0, "mu": -1.0, "sigma": 1.0, "nu": -1.0, "players": [{"k": 1.0}]}"#,
    );
    let out = bin().args(["solve", "--scenario"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta_positive"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = bin().args(["solve", "--scenariox", "foo"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_parsable_csv_with_jump_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario_file(&dir, BENCHMARK);
    let out = bin()
        .args(["simulate", "--scenario"])
        .arg(&path)
        .args(["--policy", "singular", "--z0", "-5.3605316344567572",
               "--dt", "0.001", "--t", "1", "--seed", "9"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,z,xi1,xi2,u1,u2,jump_player");
    let mut jump_rows = 0;
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 7, "bad row {line}");
        for c in &cols[..6] {
            c.parse::<f64>().unwrap();
        }
        if cols[6] != "0" {
            jump_rows += 1;
            assert_eq!(cols[6], "1");
        }
    }
    // The start sits one unit below the threshold: one time-zero jump.
    assert_eq!(jump_rows, 1);
}

#[test]
fn simulate_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario_file(&dir, GAME);
    let csv = |seed: &str| {
        let out = bin()
            .args(["simulate", "--scenario"])
            .arg(&path)
            .args(["--policy", "regular", "--z0", "0", "--dt", "0.001", "--t", "5",
                   "--seed", seed])
            .output()
            .unwrap();
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(csv("7"), csv("7"));
    assert_ne!(csv("7"), csv("8"));
}

#[test]
fn payoff_reports_estimate_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario_file(&dir, GAME);
    let out = bin()
        .args(["payoff", "--scenario"])
        .arg(&path)
        .args(["--policy", "regular", "--z0", "0", "--dt", "0.01", "--t", "5",
               "--seed", "3", "--paths", "200", "--player", "2"])
        .output()
        .unwrap();
    let payload = stdout_json(&out);
    for key in ["mean", "std_error", "n_paths", "dt", "horizon", "truncation_bound"] {
        assert!(payload.get(key).is_some(), "missing {key}");
    }
    assert_eq!(payload["n_paths"].as_u64(), Some(200));
}

#[test]
fn verify_emits_the_condition_map() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario_file(&dir, BENCHMARK);
    let out = bin()
        .args(["verify", "--scenario"])
        .arg(&path)
        .args(["--grid", "-19.36:10.64:0.01"])
        .output()
        .unwrap();
    let payload = stdout_json(&out);
    for name in ["hjb", "gradient", "complementarity", "smooth_pasting_slope"] {
        assert!(
            payload[name]["max_violation"].is_f64(),
            "missing condition {name}"
        );
    }
    assert!(payload["hjb"]["max_violation"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn sweep_k2_writes_probe_csv_and_reports_the_critical_cost() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario_file(&dir, GAME);
    let out_csv = dir.path().join("sweep.csv");
    let out = bin()
        .args(["sweep-k2", "--scenario"])
        .arg(&path)
        .args(["--theta-prime", "-6", "--lo", "0.3", "--hi", "1.0", "--tol", "1e-2", "--out"])
        .arg(&out_csv)
        .output()
        .unwrap();
    let payload = stdout_json(&out);
    let critical = payload["critical_k2"].as_f64().unwrap();
    assert!((critical - 0.5383).abs() <= 2e-2, "critical {critical}");
    let csv = std::fs::read_to_string(&out_csv).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "k2,passed,max_violation_U2prime,max_violation_AU2"
    );
    assert!(lines.count() >= 6);
}

#[test]
fn rd_reports_the_equilibrium_effort() {
    let out = bin()
        .args(["rd", "--reward", "10", "--r", "0.1", "--k", "1", "--c", "1"])
        .output()
        .unwrap();
    let payload = stdout_json(&out);
    let lambda = payload["lambda_star"].as_f64().unwrap();
    assert!((lambda - 0.38124).abs() <= 1e-4, "lambda_star = {lambda}");
    assert!(payload["br_check_residual"].as_f64().unwrap() <= 1e-10);
    assert!(payload["payoff_at_eq"].is_f64());
}

#[test]
fn rd_rejects_malformed_lambda0() {
    let out = bin()
        .args(["rd", "--reward", "10", "--r", "0.1", "--k", "1", "--c", "1",
               "--lambda0", "0.1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reading_a_scenario_does_not_mutate_it() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario_file(&dir, GAME);
    let before = std::fs::read(&path).unwrap();
    bin()
        .args(["mpe", "--scenario"])
        .arg(&path)
        .args(["--mode", "symmetric"])
        .output()
        .unwrap();
    assert_eq!(before, std::fs::read(&path).unwrap());
}
