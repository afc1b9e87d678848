//! End-to-end runs of the `circtype` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn recipe(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("recipes").join(name)
}

fn write_config(dir: &TempDir, text: &str) -> PathBuf {
    let path = dir.path().join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_circtype"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn ball_spectrum_vanishes() {
    let dir = TempDir::new().unwrap();
    let out = run(&recipe("ball.json"), dir.path(), &["spectrum"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(dir.path().join("summary.json"));
    assert_eq!(summary["result"]["vanishing_order"], "all-vanish");
    assert!(dir.path().join("spectrum.csv").exists());
}

#[test]
fn regularity_reports_classes() {
    let dir = TempDir::new().unwrap();
    let out = run(&recipe("regularity.json"), dir.path(), &["regularity"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let summary: Value = serde_json::from_str(&text).unwrap();
    let result = &summary["result"];
    assert_eq!(result["prediction"]["j_class"], 2, "{text}");
    assert_eq!(result["prediction"]["tau_class"], 3, "{text}");
}

#[test]
fn zero_direction_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        &dir,
        r#"{ "recipe": { "type": "domain", "domain": { "kind": "ball", "dimension": 2 } },
             "point": [[0.1, 0.0], [0.0, 0.0]], "direction": [[0.0, 0.0], [0.0, 0.0]] }"#,
    );
    let out = run(&config, &dir.path().join("out"), &["extremal-disk"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_config_key_is_named() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, r#"{ "recipe": { "type": "standard" }, "settings": { "sampels": 32 } }"#);
    let out = run(&config, &dir.path().join("out"), &["spectrum"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sampels"));
}

#[test]
fn mode_count_override_truncates_spectra() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        &dir,
        r#"{ "recipe": { "type": "planted", "modes": [[3, 0.1, 0.0]] }, "settings": { "modes": 8, "directions": 4 } }"#,
    );
    let out = run(&config, &dir.path().join("out"), &["spectrum"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("out/spectrum.csv")).unwrap();
    let k_col = reader.headers().unwrap().iter().position(|h| h == "k").unwrap();
    let max_k = reader.records().map(|r| r.unwrap()[k_col].parse::<usize>().unwrap()).max().unwrap();
    assert_eq!(max_k, 8);
    let summary = json(dir.path().join("out/summary.json"));
    assert_eq!(summary["result"]["vanishing_order"], 3);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let status = run(&recipe("planted_mode3.json"), out, &["spectrum"]).status;
        assert!(status.success());
    }
    for file in ["spectrum.csv", "decay.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn seeded_probes_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let status = run(&recipe("ball.json"), out, &["verify-ma", "--seed", "7"]).status;
        assert!(status.success());
    }
    assert_eq!(std::fs::read(a.join("ma.csv")).unwrap(), std::fs::read(b.join("ma.csv")).unwrap());
}

#[test]
fn manifest_records_settings_and_hashes() {
    let dir = TempDir::new().unwrap();
    assert!(run(&recipe("ball.json"), dir.path(), &["spectrum"]).status.success());
    let manifest = json(dir.path().join("manifest.json"));
    assert_eq!(manifest["settings"]["samples"], 64);
    let outputs = manifest["outputs"].as_array().expect("outputs list");
    let entry = outputs.iter().find(|o| o["name"] == "spectrum.csv").expect("spectrum.csv listed");
    let bytes = std::fs::read(dir.path().join("spectrum.csv")).unwrap();
    let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(entry["sha256"], digest.as_str());
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 1);
}

#[test]
fn numerical_failure_exits_three_with_summary() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        &dir,
        r#"{ "recipe": { "type": "domain", "domain": { "kind": "circular", "dimension": 2,
             "gauge": "abs2(z1)^2 + abs2(z2)^2", "power": 4 } } }"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&config, &out_dir, &["normalize"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(out_dir.join("summary.json"));
    assert_eq!(summary["status"], "error");
    assert!(out_dir.join("manifest.json").exists());
}

#[test]
fn json_format_writes_tables_as_json() {
    let dir = TempDir::new().unwrap();
    assert!(run(&recipe("ellipse.json"), dir.path(), &["indicatrix", "--format", "json"]).status.success());
    let table = json(dir.path().join("indicatrix.json"));
    assert_eq!(table["schema_version"], 1);
    assert!(table["columns"].as_array().unwrap().len() > 1);
    assert!(!table["rows"].as_array().unwrap().is_empty());
}

#[test]
fn missing_subcommand_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_circtype")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
