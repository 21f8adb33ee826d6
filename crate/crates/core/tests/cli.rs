use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bellforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bellforge")).args(args).output().expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn one_epoch_writes_one_row_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = bellforge(&["train", "--env", "chsh", "--mode", "eigen", "--epochs", "1", "--seed", "7", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let log_a = std::fs::read(a.join("log.csv")).unwrap();
    assert_eq!(log_a, std::fs::read(b.join("log.csv")).unwrap());
    let text = String::from_utf8(log_a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "epoch,mean_reward,max_reward,std_reward");
    assert!(lines[1].starts_with("1,"));

    let best = read_json(&a.join("best.json"));
    for key in ["env", "mode", "best_reward", "action", "policy", "value", "log_std"] {
        assert!(best.get(key).is_some(), "best.json lacks {key}");
    }
    assert!(best.get("ansatz_angles").is_none());
    let run = read_json(&a.join("run.json"));
    assert_eq!(run["seed"], 7);
    assert_eq!(run["mode"], "eigen");
}

#[test]
fn dicke_best_holds_angle_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    let o = bellforge(&[
        "train", "--env", "dicke", "--layers", "3", "--qubits", "4", "--epochs", "1", "--batch", "4", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let best = read_json(&out.join("best.json"));
    let rows = best["ansatz_angles"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.as_array().unwrap().len() == 4));
    assert_eq!(best["mode"], "ansatz");
}

#[test]
fn eval_rescores_saved_action() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e");
    let o = bellforge(&["train", "--env", "bilocal", "--epochs", "2", "--batch", "8", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let best = read_json(&out.join("best.json"));
    let o = bellforge(&["eval", "--params", out.join("best.json").to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let printed: f64 = String::from_utf8(o.stdout).unwrap().trim().parse().unwrap();
    assert_eq!(printed, best["best_reward"].as_f64().unwrap());
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"epochs": 50, "batch": 4, "hidden": [8]}"#).unwrap();
    let out = dir.path().join("p");
    let o = bellforge(&["train", "--config", cfg.to_str().unwrap(), "--epochs", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = read_json(&out.join("run.json"));
    assert_eq!(run["epochs"], 2);
    assert_eq!(run["rollouts_per_epoch"], 4);
    assert_eq!(std::fs::read_to_string(out.join("log.csv")).unwrap().lines().count(), 3);
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"foo": 1}"#).unwrap();
    let o = bellforge(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("foo"));

    let o = bellforge(&["train", "--env", "ghz", "--epochs", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bellforge(&["train", "--env", "mbi", "--mode", "fixed", "--epochs", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bellforge(&["train", "--clip-eps", "1.5", "--epochs", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bellforge(&["train", "--algorithm", "sac"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    std::fs::write(&file, "x").unwrap();
    let o = bellforge(&["train", "--epochs", "1", "--out", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn oracle_prints_result() {
    let o = bellforge(&["oracle", "--env", "chsh", "--mode", "eigen", "--resolution", "0.05"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["method"], "grid");
    assert_eq!(r["evaluations"], 126 * 126);
    assert!((r["best_value"].as_f64().unwrap() - 2.0 * 2f64.sqrt()).abs() < 5e-3);
    let o = bellforge(&["oracle", "--resolution", "0"]);
    assert_eq!(o.status.code(), Some(2));
}
