use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use vortexlab::field_io::{encode_field, read_field, EXTERIOR};

fn run(cmd: &str, config: &Value, dir: &Path) -> Output {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_vec_pretty(config).unwrap()).unwrap();
    Command::new(env!("CARGO_BIN_EXE_vortexlab"))
        .args([cmd, path.to_str().unwrap()])
        .current_dir(dir)
        .output()
        .unwrap()
}

fn disk(lambdas: &[f64], h: f64) -> Value {
    json!({
        "domain": {"kind": "unit-disk"},
        "h": h,
        "vortices": {"strengths": [1.0]},
        "lambdas": lambdas,
        "output_dir": "out"
    })
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].to_string()).collect()
}

fn report(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("out/report.json")).unwrap()).unwrap()
}

fn outputs(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir.join("out"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files.into_iter().map(|p| (p.clone(), std::fs::read(p).unwrap())).collect()
}

fn error_record(out: &Output) -> Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    let line = text.lines().last().unwrap();
    serde_json::from_str(line).unwrap()
}

#[test]
fn disk_solve_reports_oracle_radius() {
    let dir = tempfile::tempdir().unwrap();
    let h = 1.0 / 256.0;
    let out = run("solve", &disk(&[1000.0], h), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let radius: f64 = column(&dir.path().join("out/solutions.csv"), "radius")[0].parse().unwrap();
    let exact = (1.0 / (1000.0 * std::f64::consts::PI)).sqrt();
    assert!((exact - 0.017841).abs() < 1e-6);
    assert!((radius - exact).abs() <= 2.0 * h, "{radius}");
}

#[test]
fn negative_strength_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = disk(&[1000.0], 1.0 / 64.0);
    config["vortices"]["strengths"] = json!([-1.0]);
    let out = run("solve", &config, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"], "config");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn empty_lambda_list_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("sweep", &disk(&[], 1.0 / 64.0), dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(error_record(&out)["message"].as_str().unwrap().contains("empty"));
}

#[test]
fn all_entries_failing_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("solve", &disk(&[1e6], 1.0 / 32.0), dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_record(&out)["error"], "numerical");
    let rep = report(dir.path());
    assert_eq!(rep["status"], "failed");
    assert_eq!(column(&dir.path().join("out/solutions.csv"), "status"), ["failed"]);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = disk(&[300.0, 600.0], 1.0 / 128.0);
    assert!(run("sweep", &config, dir.path()).status.success());
    let first = outputs(dir.path());
    assert!(run("sweep", &config, dir.path()).status.success());
    assert_eq!(first, outputs(dir.path()));
}

#[test]
fn every_emitted_file_is_listed() {
    for cmd in ["solve", "sweep", "export", "robin", "kr-critical"] {
        let dir = tempfile::tempdir().unwrap();
        assert!(run(cmd, &disk(&[300.0], 1.0 / 64.0), dir.path()).status.success());
        let listed: BTreeSet<String> = report(dir.path())["files"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_str().unwrap().to_string())
            .collect();
        let present: BTreeSet<String> = std::fs::read_dir(dir.path().join("out"))
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert_eq!(listed, present, "{cmd}");
    }
}

#[test]
fn embedded_config_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = json!({
        "domain": {"kind": "ellipse", "a": 1.5, "b": 1.0},
        "h": 1.0 / 64.0,
        "vortices": {"strengths": [1.0]},
        "lambdas": [150],
        "critical": {"starts": 6},
        "output_dir": "out"
    });
    assert!(run("solve", &config, dir.path()).status.success());
    let first = outputs(dir.path());
    let embedded = report(dir.path())["config"].clone();
    assert_eq!(embedded["critical"]["green_h"], 1.0 / 64.0);
    assert_eq!(embedded["tolerances"]["patch"]["max_iter"], 500);
    std::fs::remove_dir_all(dir.path().join("out")).unwrap();
    assert!(run("solve", &embedded, dir.path()).status.success());
    assert_eq!(first, outputs(dir.path()));
    let center = &report(dir.path())["resolved"]["centers"][0];
    assert!(center[0].as_f64().unwrap().hypot(center[1].as_f64().unwrap()) < 1e-3);
}

#[test]
fn sweep_flags_unresolved_rows_and_keeps_going() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("sweep", &disk(&[60.0, 1000.0, 5000.0], 1.0 / 128.0), dir.path());
    assert!(out.status.success());
    let rep = report(dir.path());
    assert_eq!(rep["status"], "partial");
    let entries = rep["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 3);
    assert_eq!(entries[0]["status"], "ok");
    assert_eq!(entries[1]["status"], "ok");
    assert_eq!(entries[2]["status"], "failed");
    assert!(entries[0]["ansatz"].is_object());
    assert_eq!(column(&dir.path().join("out/diagnostics.csv"), "resolved"), ["true", "false"]);
    assert_eq!(rep["diagnostics"]["flagged"], json!([1000.0]));
    let status = column(&dir.path().join("out/solutions.csv"), "status");
    assert_eq!(status, ["ok", "ok", "failed"]);
}

#[test]
fn three_lambda_sweep_reports_scaling_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = disk(&[60.0, 120.0, 240.0], 1.0 / 256.0);
    config["tolerances"] = json!({"patch": {"min_resolution": 8.0}});
    assert!(run("sweep", &config, dir.path()).status.success());
    let rows = csv_rows(&dir.path().join("out/scaling.csv"));
    assert_eq!(rows.len(), 3);
    let ratio = column(&dir.path().join("out/scaling.csv"), "radius_ratio");
    for r in ratio {
        let r: f64 = r.parse().unwrap();
        assert!((r - 1.0).abs() < 0.1, "{r}");
    }
    assert_eq!(report(dir.path())["diagnostics"]["scaling"][0]["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn exported_fields_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = json!({
        "domain": {"kind": "ellipse", "a": 1.5, "b": 1.0},
        "h": 1.0 / 64.0,
        "vortices": {"strengths": [1.0], "centers": [[0.0, 0.0]]},
        "lambdas": [150],
        "output_dir": "out"
    });
    assert!(run("export", &config, dir.path()).status.success());
    let path = dir.path().join("out/psi_lambda150.bin");
    let dump = read_field(&path).unwrap();
    assert_eq!(dump.header.domain_kind, "ellipse");
    assert_eq!(dump.header.h, 1.0 / 64.0);
    assert!(dump.header.bbox[2] >= 1.5 && dump.header.bbox[0] <= -1.5);
    assert!(dump.values.iter().any(|v| v.to_bits() == EXTERIOR));
    let field = dump.to_field().unwrap();
    assert!(field.values().iter().all(|v| *v >= 0.0));
    assert_eq!(encode_field(&field, "psi"), std::fs::read(&path).unwrap());
}

#[test]
fn ellipse_critical_point_is_the_center() {
    let dir = tempfile::tempdir().unwrap();
    let config = json!({
        "domain": {"kind": "ellipse", "a": 1.5, "b": 1.0},
        "h": 1.0 / 64.0,
        "vortices": {"strengths": [1.0]},
        "lambdas": [150],
        "critical": {"starts": 6},
        "output_dir": "out"
    });
    assert!(run("kr-critical", &config, dir.path()).status.success());
    let path = dir.path().join("out/critical_points.csv");
    let x: f64 = column(&path, "x1")[0].parse().unwrap();
    let y: f64 = column(&path, "y1")[0].parse().unwrap();
    assert_eq!(column(&path, "converged")[0], "true");
    assert_eq!(column(&path, "morse_index")[0], "0");
    assert!(x.hypot(y) < 1e-3, "({x}, {y})");
}

#[test]
fn disk_survey_finds_one_cluster() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = disk(&[150.0], 1.0 / 64.0);
    config["survey"] = json!({"points": [[[0.3, 0.1]], [[-0.2, -0.4]], [[0.0, 0.5]]]});
    assert!(run("survey", &config, dir.path()).status.success());
    assert_eq!(report(dir.path())["entries"][0]["clusters"], 1);
    assert_eq!(column(&dir.path().join("out/survey.csv"), "size"), ["3"]);
}

#[test]
fn robin_table_is_nonnegative_inside() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = disk(&[150.0], 1.0 / 64.0);
    config["robin"] = json!({"samples": 9});
    assert!(run("robin", &config, dir.path()).status.success());
    let phi = column(&dir.path().join("out/robin.csv"), "phi");
    assert!(!phi.is_empty() && phi.len() < 81);
    assert!(phi.iter().all(|v| v.parse::<f64>().unwrap() >= 0.0));
}

#[test]
fn schema_lists_every_config_key() {
    let schema: Value =
        serde_json::from_str(include_str!("../config.schema.json")).unwrap();
    let config: vortexlab::ExperimentConfig = serde_json::from_value(disk(&[100.0], 0.1)).unwrap();
    let full = serde_json::to_value(&config).unwrap();
    let props = &schema["properties"];
    for (key, value) in full.as_object().unwrap() {
        assert!(props.get(key).is_some(), "{key}");
        if key == "tolerances" {
            for (group, inner) in value.as_object().unwrap() {
                for (field, default) in inner.as_object().unwrap() {
                    let entry = &props[key]["properties"][group]["properties"][field];
                    assert_eq!(&entry["default"], default, "{group}.{field}");
                }
            }
        }
    }
    for example in ["disk.json", "ellipse_sweep.json"] {
        let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(example)).unwrap();
        vortexlab::ExperimentConfig::from_json(&text).unwrap();
    }
}
