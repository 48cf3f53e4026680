use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "n = 64\nm = 32\n[dataset]\ntrain = 80\nvalidation = 2\ntest = 3\n[grid]\npoints = 3\nmin = 0.01\nmax = 1.0\n";

fn invbench(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_invbench")).current_dir(dir).args(args).output().unwrap()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    std::fs::write(&path, SMALL).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn unknown_config_field_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "no_such_field = 3\n").unwrap();
    let out = invbench(dir.path(), &["--config", cfg.to_str().unwrap(), "generate"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_arguments_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(invbench(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(invbench(dir.path(), &["--format", "xml", "run"]).status.code(), Some(1));
    assert_eq!(invbench(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn missing_dataset_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let missing = dir.path().join("nowhere");
    let out = invbench(dir.path(), &["--config", &cfg, "reconstruct", "--dataset", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn generate_then_reconstruct_and_attack() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let data = dir.path().join("data");
    let out = invbench(dir.path(), &["--config", &cfg, "--seed", "5", "--out", data.to_str().unwrap(), "generate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(data.join("dataset.json").exists());

    let rec = dir.path().join("rec");
    let out = invbench(
        dir.path(),
        &[
            "--config", &cfg, "--seed", "5", "--out", rec.to_str().unwrap(), "--format", "json", "--format", "csv",
            "reconstruct", "--dataset", data.to_str().unwrap(), "--solver", "tikhonov", "--alpha", "0.1",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(rec.join("reconstruct.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 3);
    let csv = std::fs::read_to_string(rec.join("reconstruct.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);

    let att = dir.path().join("att");
    let out = invbench(
        dir.path(),
        &[
            "--config", &cfg, "--out", att.to_str().unwrap(), "attack", "--dataset", data.to_str().unwrap(),
            "--alpha", "0.1", "--method", "pgd", "--instance", "1",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read_dir(&att).unwrap().count() > 0);
}

#[test]
fn run_then_report_reproduces_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let run = dir.path().join("run");
    let out = invbench(dir.path(), &["--config", &cfg, "--workers", "1", "--out", run.to_str().unwrap(), "--format", "json", "run"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["manifest.json", "metrics.json", "stability.json", "summary.md"] {
        assert!(run.join(name).exists(), "{name} missing");
    }
    assert!(!run.join("metrics.csv").exists());
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "complete");

    let again = dir.path().join("again");
    let out = invbench(dir.path(), &["--out", again.to_str().unwrap(), "--format", "csv", "report", "--from", run.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(again.join("metrics.csv").exists());
    assert_eq!(
        std::fs::read_to_string(again.join("summary.md")).unwrap(),
        std::fs::read_to_string(run.join("summary.md")).unwrap()
    );
}
