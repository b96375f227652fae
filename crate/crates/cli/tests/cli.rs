use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cohevo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cohevo"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn load(name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(configs().join(name)).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

fn run_into(config: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", config, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    cohevo(&args)
}

fn rod_config() -> String {
    configs().join("rod_linear.json").to_str().unwrap().to_string()
}

#[test]
fn run_writes_one_trace_row_per_knot() {
    let tmp = TempDir::new().unwrap();
    let out = run_into(&rod_config(), tmp.path(), &["--snapshots", "0.25,0.75"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let trace = std::fs::read_to_string(tmp.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 101);
    for f in ["config.json", "states.json", "snapshots.json", "mesh.json", "report.json", "euler.json"] {
        assert!(tmp.path().join(f).exists(), "{f} missing");
    }
    let snaps: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("snapshots.json")).unwrap()).unwrap();
    assert_eq!(snaps.as_array().unwrap().len(), 2);
}

#[test]
fn invalid_parameter_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = load("rod_linear.json");
    cfg["law"]["b"] = json!(-1.0);
    let path = write(tmp.path(), "bad.json", &cfg);
    let out = run_into(&path, &tmp.path().join("out"), &[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("law.b"), "{}", stderr(&out));
}

#[test]
fn strict_run_stops_on_nonconvergence() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = load("rod_linear.json");
    cfg["solver"] = json!({"max_iterations": 1});
    let path = write(tmp.path(), "starved.json", &cfg);
    let out = run_into(&path, &tmp.path().join("strict"), &["--strict"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    let out = run_into(&path, &tmp.path().join("lenient"), &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("non-converged"), "{}", stderr(&out));
    let verify = cohevo(&["verify", tmp.path().join("lenient").to_str().unwrap()]);
    assert_eq!(code(&verify), 3);
    assert!(stderr(&verify).contains("solver_convergence"), "{}", stderr(&verify));
}

#[test]
fn fresh_run_verifies() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&run_into(&rod_config(), tmp.path(), &[])), 0);
    let out = cohevo(&["verify", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}{}", stdout(&out), stderr(&out));
    assert!(!stdout(&out).contains("FAIL"));
    assert!(stdout(&out).contains("PASS irreversibility"));
}

#[test]
fn corrupted_history_names_invariant_and_knot() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&run_into(&rod_config(), tmp.path(), &[])), 0);
    let path = tmp.path().join("states.json");
    let mut states: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let g = states["gamma"][80][0].as_f64().unwrap();
    states["gamma"][80][0] = json!(g * 0.5);
    std::fs::write(&path, states.to_string()).unwrap();
    let out = cohevo(&["verify", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    let err = stderr(&out);
    assert!(err.contains("irreversibility at knot 80"), "{err}");
}

#[test]
fn loose_solver_tolerance_is_caught_by_verify() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = load("plate_scalar.json");
    cfg["solver"] = json!({"residual_tolerance": 1e-2});
    cfg["time"] = json!({"uniform": {"steps": 20}});
    cfg["verification"]["stability_competitors"] = json!(0);
    let path = write(tmp.path(), "loose.json", &cfg);
    assert_eq!(code(&run_into(&path, &tmp.path().join("run"), &[])), 0);
    let out = cohevo(&["verify", tmp.path().join("run").to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(stdout(&out).contains("FAIL euler_conditions"), "{}", stdout(&out));
}

#[test]
fn missing_run_directory_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let out = cohevo(&["verify", tmp.path().join("nothing").to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}

#[test]
fn rod_study_passes() {
    let tmp = TempDir::new().unwrap();
    let spec = configs().join("study_rod_linear.json");
    let out = cohevo(&["study", "--config", spec.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}{}", stdout(&out), stderr(&out));
    for f in ["study.csv", "study_levels.csv", "study.json"] {
        assert!(tmp.path().join(f).exists(), "{f} missing");
    }
}

#[test]
fn study_needs_three_levels() {
    let tmp = TempDir::new().unwrap();
    let spec = json!({"base": rod_config(), "levels": [50, 100], "checkpoints": [0.5]});
    let path = write(tmp.path(), "study.json", &spec);
    let out = cohevo(&["study", "--config", &path, "--out", tmp.path().join("s").to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("levels"), "{}", stderr(&out));
}

#[test]
fn mismatched_oracle_fails_the_study() {
    let tmp = TempDir::new().unwrap();
    let spec = json!({
        "base": rod_config(),
        "levels": [25, 50, 100],
        "checkpoints": [0.5],
        "oracle": "analytic_1d_griffith"
    });
    let path = write(tmp.path(), "study.json", &spec);
    let out = cohevo(&["study", "--config", &path, "--out", tmp.path().join("s").to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("does not match the law"), "{}", stderr(&out));
}

#[test]
fn runs_are_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = configs().join("rod_saturating.json");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&run_into(cfg.to_str().unwrap(), &a, &[])), 0);
    assert_eq!(code(&run_into(cfg.to_str().unwrap(), &b, &[])), 0);
    for f in ["trace.csv", "states.json", "report.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn stored_config_reproduces_the_run() {
    let tmp = TempDir::new().unwrap();
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");
    let cfg = configs().join("rod_linear_preseeded.json");
    assert_eq!(code(&run_into(cfg.to_str().unwrap(), &first, &[])), 0);
    let stored = first.join("config.json");
    assert_eq!(code(&run_into(stored.to_str().unwrap(), &second, &[])), 0);
    assert_eq!(
        std::fs::read(first.join("trace.csv")).unwrap(),
        std::fs::read(second.join("trace.csv")).unwrap()
    );
    assert_eq!(std::fs::read(&stored).unwrap(), std::fs::read(second.join("config.json")).unwrap());
}
