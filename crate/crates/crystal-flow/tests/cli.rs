//! Black-box tests of the command-line binary: exit codes, output files,
//! and determinism of serialized artifacts.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crystal-flow"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn help_succeeds() {
    let out = bin().arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in [
        "simulate-eps",
        "simulate-eff",
        "calibrate",
        "oracle",
        "converge",
        "compare",
        "portrait",
        "render",
    ] {
        assert!(text.contains(sub), "--help should list {sub}");
    }
}

#[test]
fn missing_config_file_is_input_error() {
    let out = bin()
        .args(["simulate-eps", "--config", "/nonexistent/cfg.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_config_key_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{"alpha": -1.0, "beta": 1.0, "kind": "single",
            "shape": {"type": "rectangle", "l1": 2.0, "l2": 2.0},
            "epsilons": [0.5], "t_max": 0.1, "bogus_key": 3}"#,
    );
    let out = bin().args(["simulate-eps", "--config", &cfg]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn simulate_eps_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("run").to_str().unwrap().to_string();
    let cfg = write_config(
        dir.path(),
        "run.json",
        &format!(
            r#"{{"alpha": -1.0, "beta": 1.0, "kind": "single",
            "shape": {{"type": "rectangle", "l1": 2.0, "l2": 1.5}},
            "epsilons": [0.5], "t_max": 0.1, "samples": 6,
            "output_prefix": "{prefix}"}}"#
        ),
    );
    let out = bin().args(["simulate-eps", "--config", &cfg]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let jsonl = std::fs::read_to_string(format!("{prefix}.traj.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 6);
    for line in jsonl.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["t"].is_number() && v["vertices"].is_array());
    }
    let events: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{prefix}.events.json")).unwrap())
            .unwrap();
    assert!(events.is_array());
    let csv = std::fs::read_to_string(format!("{prefix}.csv")).unwrap();
    assert!(csv.lines().next().unwrap().starts_with("t,"));

    // Identical config reruns byte-identically.
    let rerun = dir.path().join("rerun").to_str().unwrap().to_string();
    let cfg2 = write_config(
        dir.path(),
        "rerun.json",
        &std::fs::read_to_string(&cfg).unwrap().replace(&prefix, &rerun),
    );
    bin().args(["simulate-eps", "--config", &cfg2]).output().unwrap();
    assert_eq!(
        std::fs::read(format!("{prefix}.traj.jsonl")).unwrap(),
        std::fs::read(format!("{rerun}.traj.jsonl")).unwrap()
    );
}

#[test]
fn calibrate_reports_decision() {
    let out = bin()
        .args([
            "calibrate", "--alpha", "-1", "--beta", "1", "--epsilon", "1", "--p", "-0.25",
            "--q", "0.25", "--chi", "1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["calibrable"], serde_json::Value::Bool(true));
}

#[test]
fn oracle_small_corpus_passes() {
    let out = bin()
        .args(["oracle", "--edges", "30", "--m-per-period", "150", "--seed", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn portrait_prints_csv() {
    let out = bin()
        .args([
            "portrait", "--alpha", "-2", "--beta", "1", "--l1", "3,4,5", "--l2", "1,2",
            "--t-max", "1.0",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().count() >= 7, "header plus six grid rows");
    assert!(text.contains("equilibrium"));
}

#[test]
fn render_writes_deterministic_svgs() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("img").to_str().unwrap().to_string();
    let cfg = write_config(
        dir.path(),
        "render.json",
        &format!(
            r#"{{"alpha": -1.0, "beta": 1.0, "kind": "single",
            "shape": {{"type": "rectangle", "l1": 2.0, "l2": 1.5}},
            "epsilons": [0.5], "t_max": 0.1, "samples": 6,
            "output_prefix": "{prefix}"}}"#
        ),
    );
    let run = |_: usize| {
        bin()
            .args(["render", "--config", &cfg, "--times", "0.0,0.05"])
            .output()
            .unwrap()
    };
    assert_eq!(run(0).status.code(), Some(0));
    let first = std::fs::read(format!("{prefix}.000.svg")).unwrap();
    assert!(String::from_utf8_lossy(&first).starts_with("<?xml"));
    assert!(Path::new(&format!("{prefix}.001.svg")).exists());
    assert!(!Path::new(&format!("{prefix}.002.svg")).exists());
    assert_eq!(run(1).status.code(), Some(0));
    assert_eq!(first, std::fs::read(format!("{prefix}.000.svg")).unwrap());
}
