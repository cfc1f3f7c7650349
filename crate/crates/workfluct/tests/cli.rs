use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn workfluct(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_workfluct")).args(args).output().expect("binary runs")
}

fn config(dir: &Path, json: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_preset_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = config(dir.path(), &format!(r#"{{"preset": "fig5", "out": {:?}}}"#, out));
    let o = workfluct(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown preset 'fig5'"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn misspelled_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), r#"{"preset": "oracle-only", "lamda0": 0.1}"#);
    let o = workfluct(&["validate", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lamda0"), "{}", stderr(&o));
}

#[test]
fn unstable_ramp_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), r#"{"preset": "crooks", "lambda0": 0.3}"#);
    let o = workfluct(&["validate", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let d: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(d["errors"][0].as_str().unwrap().contains("stability"));
    assert!(d["stability_margin"].as_f64().unwrap() < 0.0);
}

#[test]
fn degenerate_coupling_is_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), r#"{"preset": "fig4", "g1": 0.0}"#);
    let o = workfluct(&["validate", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    let d: Value = serde_json::from_slice(&o.stdout).unwrap();
    let warnings: Vec<&str> = d["warnings"].as_array().unwrap().iter().map(|w| w.as_str().unwrap()).collect();
    assert!(warnings.iter().any(|w| w.contains("g1 = 0")), "{warnings:?}");
}

#[test]
fn canonical_presets_validate_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    for preset in
        ["fig1", "fig2", "fig3-drives", "fig4", "fig4-reverse", "crooks", "exclusive", "open-system", "oracle-only"]
    {
        let cfg = config(dir.path(), &format!(r#"{{"preset": "{preset}"}}"#));
        let o = workfluct(&["validate", &cfg]);
        assert_eq!(o.status.code(), Some(0), "{preset}");
        let d: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(d["warnings"].as_array().unwrap().len(), 0, "{preset}: {}", d["warnings"]);
    }
}

#[test]
fn numerical_guard_failure_leaves_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    // Eight Fock states hold too much thermal weight in the top levels.
    let cfg = config(dir.path(), &format!(r#"{{"preset": "crooks", "n_fock": 8, "u_max": 1.0, "out": {:?}}}"#, out));
    let o = workfluct(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn oversized_step_is_a_guard_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = config(dir.path(), &format!(r#"{{"preset": "oracle-only", "dt": 1.0, "out": {:?}}}"#, out));
    let o = workfluct(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("step too large"));
    assert!(!out.exists());
}

#[test]
fn undriven_oracle_has_one_peak_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = config(dir.path(), &format!(r#"{{"preset": "oracle-only", "v": 0.0, "out": {:?}}}"#, out));
    let o = workfluct(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("oracle_peaks.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 2, "{csv}");
    let fields: Vec<f64> = rows[1].split(',').map(|x| x.parse().unwrap()).collect();
    assert!(fields[0].abs() < 1e-12 && (fields[1] - 1.0).abs() < 1e-12, "{csv}");
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["files"].as_array().unwrap().len(), 2);
}

#[test]
fn command_line_overrides_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = config(dir.path(), r#"{"preset": "fig1", "out": "ignored", "samples": 20, "seed": 1}"#);
    let o = workfluct(&["run", &cfg, "--out", out.to_str().unwrap(), "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["config"]["samples"], 20);
    let names: Vec<&str> = manifest["files"].as_array().unwrap().iter().map(|f| f["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["fig1_populations.csv", "comparison.json"]);
    for name in names {
        assert!(out.join(name).exists());
    }
}
