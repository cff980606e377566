//! End-to-end tests of the `nhim` binary: exit codes, manifest and CSV
//! artifacts, determinism of payloads, and the fault-injection path of the
//! verification battery.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nhim"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .args(args)
        .args(["--output-dir", dir.to_str().unwrap()])
        .output()
        .expect("binary spawns")
}

fn manifest(dir: &Path, name: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(name)).expect("manifest exists");
    serde_json::from_str(&text).expect("manifest is JSON")
}

fn csv_rows(dir: &Path, name: &str) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(dir.join(name)).expect("csv exists");
    text.lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn column(rows: &[Vec<String>], name: &str) -> f64 {
    let idx = rows[0]
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("column {name} in {:?}", rows[0]));
    rows[1][idx].parse().expect("numeric cell")
}

#[test]
fn no_command_and_empty_config_are_usage_errors() {
    let out = bin().output().expect("binary spawns");
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("usage"));

    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("empty.toml");
    std::fs::write(&cfg, "").unwrap();
    let out = bin()
        .args(["run", cfg.to_str().unwrap()])
        .output()
        .expect("binary spawns");
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("usage"), "stderr: {err}");
    assert!(err.contains("no command"), "stderr: {err}");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("typo.toml");
    std::fs::write(&cfg, "comand = \"toy\"\n").unwrap();
    let out = bin()
        .args(["run", cfg.to_str().unwrap()])
        .output()
        .expect("binary spawns");
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn toy_manifest_beats_oracle_tolerance() {
    let dir = TempDir::new().unwrap();
    let out = run_in(dir.path(), &["toy", "--rho", "power:1", "--tol", "1e-10"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let m = manifest(dir.path(), "toy_manifest.json");
    assert_eq!(m["command"], "toy");
    assert_eq!(m["error"], Value::Null);
    let oracle_error = m["results"]["oracle_error"].as_f64().unwrap();
    assert!(oracle_error < 1e-8, "oracle error {oracle_error}");
    assert!(dir.path().join("toy_section.csv").exists());
}

#[test]
fn kerr_trapped_schwarzschild_row_is_photon_sphere() {
    let dir = TempDir::new().unwrap();
    let out = run_in(dir.path(), &["kerr-trapped", "--m", "1", "--a", "0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let rows = csv_rows(dir.path(), "kerr_trapped.csv");
    assert_eq!(rows.len(), 2, "one header and one data row");
    let r = column(&rows, "r");
    assert!((r - 3.0).abs() < 1e-10, "r = {r}");
    assert!(column(&rows, "residual_symbol").abs() < 1e-9);
    assert!(column(&rows, "closed_form_gap") < 1e-10);
}

#[test]
fn kerr_rates_schwarzschild_match_closed_form() {
    let dir = TempDir::new().unwrap();
    let out = run_in(dir.path(), &["kerr-rates", "--m", "1", "--a", "0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let rows = csv_rows(dir.path(), "kerr_rates.csv");
    let nu_min = column(&rows, "nu_min");
    let expected = 6.0 * 3.0f64.sqrt();
    assert!(
        ((nu_min - expected) / expected).abs() < 1e-4,
        "nu_min = {nu_min}"
    );
}

#[test]
fn csv_payloads_are_deterministic_across_reruns() {
    let first = TempDir::new().unwrap();
    let second = TempDir::new().unwrap();
    let args = ["toy", "--t-end", "150", "--grid-buffer", "30"];
    assert!(run_in(first.path(), &args).status.success());
    assert!(run_in(second.path(), &args).status.success());

    let a = std::fs::read(first.path().join("toy_section.csv")).unwrap();
    let b = std::fs::read(second.path().join("toy_section.csv")).unwrap();
    assert_eq!(a, b, "section payloads differ between identical runs");
}

#[test]
fn config_file_runs_and_json_is_accepted() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "command = \"kerr-trapped\"\n[kerr_trapped]\na = 0.5\n",
    )
    .unwrap();
    let out = run_in(dir.path(), &["run", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path(), "kerr_trapped_manifest.json");
    assert_eq!(m["config"]["kerr_trapped"]["a"].as_f64(), Some(0.5));

    let jdir = TempDir::new().unwrap();
    let jcfg = jdir.path().join("run.json");
    std::fs::write(
        &jcfg,
        r#"{"command": "kerr-trapped", "kerr_trapped": {"a": 0.5}}"#,
    )
    .unwrap();
    let out = run_in(jdir.path(), &["run", jcfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows_toml = csv_rows(dir.path(), "kerr_trapped.csv");
    let rows_json = csv_rows(jdir.path(), "kerr_trapped.csv");
    assert_eq!(rows_toml, rows_json, "TOML and JSON configs disagree");
}

#[test]
fn output_dir_env_var_is_honored() {
    let dir = TempDir::new().unwrap();
    let out = bin()
        .args(["kerr-trapped"])
        .env("NHIM_OUTPUT_DIR", dir.path())
        .output()
        .expect("binary spawns");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("kerr_trapped.csv").exists());
    assert!(dir.path().join("kerr_trapped_manifest.json").exists());
}

#[test]
fn verify_only_filter_runs_matching_criteria() {
    let dir = TempDir::new().unwrap();
    let out = run_in(dir.path(), &["verify", "--only", "torus"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("torus-hypotheses"));
    assert!(stdout.contains("summary: 1 passed, 0 failed"), "{stdout}");

    let rows = csv_rows(dir.path(), "verify_results.csv");
    assert_eq!(rows.len(), 2, "only one criterion should run");

    let out = run_in(dir.path(), &["verify", "--only", "no-such-criterion"]);
    assert_eq!(out.status.code(), Some(1), "unmatched filter is a config error");
}

#[test]
fn injected_rate_fault_fails_verification_with_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = bin()
        .args(["verify", "--only", "minimal-rate"])
        .args(["--output-dir", dir.path().to_str().unwrap()])
        .env("NHIM_FAULT_RATE_SCALE", "2.0")
        .output()
        .expect("binary spawns");
    assert_eq!(out.status.code(), Some(2));
    let m = manifest(dir.path(), "verify_manifest.json");
    assert_eq!(m["error"]["name"], "CriteriaFailed");
    assert_eq!(m["results"]["failed"].as_u64(), Some(1));

    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL"), "{stdout}");
}
