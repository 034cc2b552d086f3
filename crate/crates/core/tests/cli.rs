use std::fs;
use std::path::Path;
use std::process::Command;

const FISHER: &str = r#"{"name": "fisher", "N": 1, "tau": 1.0,
  "builtin": {"kind": "fisher_kpp_delay", "params": {"b": 1.0, "tau": 1.0}}}"#;

const CHEMOSTAT_WASHOUT: &str = r#"{"name": "washout", "N": 2, "tau": 0.2,
  "builtin": {"kind": "chemostat", "params": {"D": 1.0, "S0": 2.0, "tau": 0.2, "m": 1.0, "a": 1.0, "d1": 1.0, "d2": 1.0}}}"#;

fn run(dir: &Path, config: &str, args: &[&str]) -> i32 {
    let path = dir.join("config.json");
    fs::write(&path, config).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_wavefront"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .env("WAVEFRONT_WORKERS", "2")
        .output()
        .unwrap();
    status.status.code().unwrap()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn spectrum_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let code = run(dir.path(), FISHER, &["spectrum", "--out", out.to_str().unwrap(), "--speeds", "4,6"]);
    assert_eq!(code, 0);
    let report = read_json(&out.join("spectrum.json"));
    assert!((report["lambda0"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert_eq!(report["speeds"].as_array().unwrap().len(), 2);
}

#[test]
fn profile_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(run(dir.path(), FISHER, &["profile", "--out", out.to_str().unwrap(), "--speeds", "6,10", "--seed", "3"]), 0);
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 7);
    for name in names {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?} differs");
    }
    let summary = read_json(&a.join("profile_summary.json"));
    assert!(summary.as_array().unwrap().iter().all(|row| row["ok"] == true));
}

#[test]
fn verify_output_is_deterministic_under_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(run(dir.path(), FISHER, &["verify", "--out", out.to_str().unwrap(), "--seed", "11"]), 0);
    }
    assert_eq!(fs::read(a.join("hypotheses.json")).unwrap(), fs::read(b.join("hypotheses.json")).unwrap());
}

#[test]
fn slow_speed_reports_non_contraction() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(run(dir.path(), FISHER, &["profile", "--out", out.to_str().unwrap(), "--speeds", "0.5"]), 3);
    let summary = read_json(&out.join("profile_summary.json"));
    assert!(summary[0]["error"].is_string());
}

#[test]
fn washout_chemostat_fails_h1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(run(dir.path(), CHEMOSTAT_WASHOUT, &["verify", "--out", out.to_str().unwrap()]), 2);
    let report = read_json(&out.join("hypotheses.json"));
    assert_eq!(report["h1"]["ok"], false);
}

#[test]
fn h3_condition_is_flagged_for_long_delay() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = FISHER.replace("1.0}", "2.0}").replace("\"tau\": 1.0,", "\"tau\": 2.0,");
    run(dir.path(), &config, &["verify", "--out", out.to_str().unwrap()]);
    let report = read_json(&out.join("hypotheses.json"));
    assert_eq!(report["h3"]["evidence"]["condition_met"], false);
    assert!(report["h3"]["evidence"]["note"].as_str().unwrap().contains("not met"));
}

#[test]
fn config_errors_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), r#"{"name": "x"}"#, &["spectrum"]), 4);
    let unknown = FISHER.replacen('{', r#"{"colour": 1, "#, 1);
    assert_eq!(run(dir.path(), &unknown, &["spectrum"]), 4);
    let bad_dt = FISHER.replacen('{', r#"{"pipeline": {"pde": {"dt": 0.5}}, "#, 1);
    assert_eq!(run(dir.path(), &bad_dt, &["validate", "--speeds", "6"]), 4);
}

#[test]
fn usage_errors_exit_four() {
    let status = Command::new(env!("CARGO_BIN_EXE_wavefront")).arg("frobnicate").output().unwrap();
    assert_eq!(status.status.code(), Some(4));
    let status = Command::new(env!("CARGO_BIN_EXE_wavefront")).arg("--help").output().unwrap();
    assert_eq!(status.status.code(), Some(0));
}
