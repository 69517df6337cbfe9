//! Exit codes and outputs of the command-line driver.

use std::path::Path;
use std::process::{Command, Output};

fn perfektor(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perfektor"))
        .args(args)
        .current_dir(dir)
        .env("PERFEKTOR_THREADS", "1")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, body: &str) {
    std::fs::write(dir.join(name), body).unwrap();
}

const HB: &str = r#"{ "dimension": 1, "model": "heat_bath", "beta": 0.1 }"#;

#[test]
fn passing_run_exits_zero_and_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "model.json", HB);
    write(dir.path(), "run.json", r#"{ "model": "model.json", "sites": [[0], [1]], "replicates": 200 }"#);
    let out = perfektor(&["sample", "--config", "run.json", "--seed", "4", "--out", "res"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("res/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["replicates"], 200);
    assert!(manifest["files"]["samples.csv"].is_string());
    let csv = std::fs::read_to_string(dir.path().join("res/samples.csv")).unwrap();
    assert_eq!(csv.lines().count(), 201);
    assert!(csv.starts_with("replicate,n_stop,0,1\n"));
}

#[test]
fn replicate_override_and_decompose_check() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "run.json", &format!(r#"{{ "model": {HB} }}"#));
    let out = perfektor(&["decompose", "--config", "run.json", "--check"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS reconstruction"));
    let out = perfektor(&["validate", "--config", "run.json", "--replicates", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_configuration_is_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "run.json", &format!(r#"{{ "model": {HB}, "oracle": {{ "side": 2 }} }}"#));
    let out = perfektor(&["oracle", "--config", "run.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "torus_too_small");
    let out = perfektor(&["oracle", "--config", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_assertion_exits_one() {
    // A control identical to the model cannot be rejected.
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "run.json",
        &format!(
            r#"{{ "model": {HB}, "control": {HB}, "replicates": 2000,
                 "oracle": {{ "side": 8, "burn_in": 20.0, "thinning": 2.0, "chains": 2 }} }}"#
        ),
    );
    let out = perfektor(&["compare", "--config", "run.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL control_rejected"));
}
