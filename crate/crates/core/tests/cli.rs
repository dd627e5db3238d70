use std::path::Path;
use std::process::{Command, Output};

fn hadamard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hadamard")).args(args).output().expect("binary runs")
}

fn configs() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn version_flag() {
    let out = hadamard(&["--version"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("hadamard "));
}

#[test]
fn models_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = hadamard(&["models", "--model", "constant", "--k", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], true);
    let on_disk: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("models.json")).unwrap()).unwrap();
    assert_eq!(on_disk, report);
    let csv = std::fs::read_to_string(dir.path().join("models.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,a,b"));
    assert!(csv.lines().count() > 10);
}

#[test]
fn failed_check_exits_one() {
    let out = hadamard(&["models", "--model", "euclidean", "--check-c", "--t1", "20", "--eps", "1", "--eps-tilde", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], false);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(hadamard(&["--config", empty.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(hadamard(&["models"]).status.code(), Some(2));
    assert_eq!(hadamard(&["jacobi", "--model", "no-such-model"]).status.code(), Some(2));
    assert_eq!(hadamard(&["models", "--model", "constant", "--param", "k"]).status.code(), Some(2));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"command": "models", "model": "euclidean", "bogus": 1}"#).unwrap();
    assert_eq!(hadamard(&["--config", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn golden_config_runs_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("jacobi_log_pinched.json");
    let out = hadamard(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("jacobi.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,log_f,u"));
}
