use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hartree-lab"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env("HARTREE_LAB_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

const SMALL_LIMIT: &[&str] = &["--family", "limit", "--L", "8", "--n", "24", "--tol", "1e-8"];

#[test]
fn invalid_grid_size_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["solve", "--n", "100"]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hartree-lab"))
        .args(["solve", "--n", "16"])
        .arg("--out")
        .arg(dir.path())
        .env("HARTREE_LAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn missing_and_corrupt_states_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nothing.fld");
    let o = run(dir.path(), &["verify", "--state", missing.to_str().unwrap()]);
    assert_eq!(code(&o), 1);

    let corrupt = dir.path().join("corrupt.fld");
    std::fs::write(&corrupt, b"not a field file at all").unwrap();
    let o = run(dir.path(), &["verify", "--state", corrupt.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn supercritical_mass_collapses() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["solve", "--family", "original", "--N", "1e9", "--n", "16", "--L", "8"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn solve_writes_state_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["solve"];
    args.extend_from_slice(SMALL_LIMIT);
    let o = run(dir.path(), &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let sidecar = json(&dir.path().join("limit.json"));
    assert_eq!(sidecar["family"], "limit");
    assert!(sidecar["multiplier"].as_f64().unwrap() < 0.0);
    assert_eq!(sidecar["converged"], true);

    let manifest = json(&dir.path().join("manifest.json"));
    let hash = manifest["config_hash"].as_str().unwrap();
    let names: Vec<&str> = manifest["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| {
            assert_eq!(a["config_hash"], hash);
            a["path"].as_str().unwrap()
        })
        .collect();
    for want in ["limit.fld", "limit.json", "limit_profile.csv", "limit_profile.gp", "limit_trace.csv"] {
        assert!(names.contains(&want), "{want} missing from {names:?}");
        assert!(dir.path().join(want).exists());
    }

    // the written state verifies from its sidecar alone
    let state = dir.path().join("limit.fld");
    let vdir = tempfile::tempdir().unwrap();
    let o = run(vdir.path(), &["verify", "--state", state.to_str().unwrap(), "--L", "8", "--n", "24"]);
    let report = json(&vdir.path().join("verify.json"));
    let keys: Vec<&str> = report["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["name"].as_str().unwrap())
        .collect();
    assert_eq!(keys, ["el_residual", "lemma_3.1", "kernel_eq1.12", "decay_lemma_2.1"]);
    assert_eq!(report["family"], "limit");
    let expected = if report["pass"] == true { 0 } else { 4 };
    assert_eq!(code(&o), expected);
    assert_eq!(report["entries"][0]["pass"], true);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["solve", "--family", "limit", "--L", "8", "--n", "16", "--tol", "1e-7", "--seed", "3"];
    assert_eq!(code(&run(a.path(), &args)), 0);
    assert_eq!(code(&run(b.path(), &args)), 0);
    for name in ["limit.fld", "limit.json", "limit_trace.csv", "limit_profile.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
    let ha = json(&a.path().join("manifest.json"))["artifacts"].clone();
    let hb = json(&b.path().join("manifest.json"))["artifacts"].clone();
    assert_eq!(ha, hb);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"family": "limit", "L": 8, "n": 100, "tol": 1e-7}"#).unwrap();
    let o = run(dir.path(), &["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let o = run(dir.path(), &["solve", "--config", cfg.to_str().unwrap(), "--n", "16"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["config"]["n"], 16);
    assert_eq!(manifest["config"]["L"], 8.0);
}

#[test]
fn green_scan_reports_bound() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["scan", "green", "--c", "8,16", "--L", "16"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&dir.path().join("green.json"));
    let text = report.to_string();
    assert!(text.contains("green_lemma_2.3") && text.contains("green_methods"));
    let csv = std::fs::read_to_string(dir.path().join("green.csv")).unwrap();
    assert!(csv.starts_with("c,radius,quadrature,fourier,bound\n"));
    assert!(csv.lines().count() > 2 * 28);
}
