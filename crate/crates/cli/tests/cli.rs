use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_snowflake-embed"));
    c.env_remove(snowflake_embed_cli::OUT_DIR_ENV);
    c
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().arg("--out-dir").arg(dir).args(args).output().unwrap()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).expect("JSON diagnostic");
    serde_json::from_str(line).unwrap()
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn strict_pipeline_on_eight_points_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["pipeline", "--family", "interval", "--size", "8", "--epsilon", "0.75", "--theta", "0.5", "--mode", "strict"],
    );
    assert_eq!(out.status.code(), Some(0));
    let report = read(&dir.path().join("report.json"));
    assert_eq!(report["pass"], true);
    assert_eq!(report["certifies_theorem_bounds"], true);
    for name in [
        "space.json", "dims.json", "params.json", "nets.json", "embedding.json", "report.json",
        "pipeline.manifest.json",
    ] {
        assert_eq!(read(&dir.path().join(name))["schema"], 1, "{name}");
    }
    let embedding = read(&dir.path().join("embedding.json"));
    let width = embedding["dimension"].as_u64().unwrap() as usize;
    assert_eq!(embedding["coords"][0].as_array().unwrap().len(), width);
    assert_eq!(embedding["metadata"]["seed"], 0);
}

#[test]
fn missing_input_is_a_validation_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere.json");
    let out = run_in(dir.path(), &["embed", "--input", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let diag = stderr_json(&out);
    assert!(diag["message"].as_str().unwrap().contains("nowhere.json"));
    assert_eq!(diag["exit_code"], 1);
}

#[test]
fn infeasible_tau_exits_with_mathematical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["params", "--epsilon", "0.51", "--theta", "0.5", "--delta", "1", "--C", "2", "--mode", "strict"],
    );
    assert_eq!(out.status.code(), Some(2));
    let diag = stderr_json(&out);
    assert_eq!(diag["error"], "NoFeasibleTau");
    let cap = diag["details"]["analytic_tau_cap"].as_f64().unwrap();
    // (tau3) caps tau at 8^(-1/(2 eps - 1)) = 8^-50.
    assert!((cap / 8f64.powi(-50) - 1.0).abs() < 1e-9);
}

#[test]
fn color_budget_overflow_exits_with_mathematical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["params", "--epsilon", "0.75", "--theta", "0.5", "--delta", "1", "--C", "2", "--n", "3"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "BudgetExceeded");
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["params", "--mode", "practical", "--C", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "Usage");
    assert_eq!(run_in(dir.path(), &["params", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(run_in(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn invalid_metric_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "a,b,c\n0,1,5\n1,0,1\n5,1,0\n").unwrap();
    let out = run_in(dir.path(), &["dims", "--input", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "InvalidMetric");
}

#[test]
fn pipeline_equals_its_stages() {
    let whole = tempfile::tempdir().unwrap();
    let staged = tempfile::tempdir().unwrap();
    let common = ["--epsilon", "0.8", "--theta", "0.5", "--mode", "practical", "--tau", "0.1", "--n", "2"];
    let mut args = vec!["pipeline", "--family", "cantor", "--depth", "3", "--seed", "4", "--net-order", "farthest-point"];
    args.extend(common);
    assert!(run_in(whole.path(), &args).status.success());

    let s = staged.path();
    let space = s.join("space.json");
    let params = s.join("params.json");
    let embedding = s.join("embedding.json");
    let space = space.to_str().unwrap();
    assert!(run_in(s, &["gen", "--family", "cantor", "--depth", "3", "--seed", "4"]).status.success());
    assert!(run_in(s, &["dims", "--input", space, "--theta", "0.5"]).status.success());
    let mut p = vec!["params", "--input", space];
    p.extend(common);
    assert!(run_in(s, &p).status.success());
    let params = params.to_str().unwrap();
    assert!(run_in(s, &["nets", "--input", space, "--params", params, "--net-order", "farthest-point"])
        .status
        .success());
    assert!(run_in(s, &["embed", "--input", space, "--params", params, "--net-order", "farthest-point"])
        .status
        .success());
    assert!(run_in(s, &["verify", "--input", space, "--embedding", embedding.to_str().unwrap()])
        .status
        .success());
    for name in ["space.json", "dims.json", "params.json", "nets.json", "embedding.json", "report.json"] {
        assert_eq!(
            std::fs::read(whole.path().join(name)).unwrap(),
            std::fs::read(s.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env(snowflake_embed_cli::OUT_DIR_ENV, dir.path())
        .args(["gen", "--family", "star", "--arms", "3"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let space = read(&dir.path().join("space.json"));
    assert_eq!(space["labels"].as_array().unwrap().len(), 4);
    assert_eq!(space["generator"]["family"], "star");
    let manifest = read(&dir.path().join("gen.manifest.json"));
    assert_eq!(manifest["config"]["command"]["arms"], 3);
}

#[test]
fn verify_refuses_a_different_space() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(run_in(d, &["pipeline", "--size", "6", "--mode", "practical", "--tau", "0.1"]).status.success());
    let other = d.join("other");
    assert!(run_in(&other, &["gen", "--size", "6", "--alpha", "0.9"]).status.success());
    let out = run_in(
        d,
        &[
            "verify",
            "--input",
            other.join("space.json").to_str().unwrap(),
            "--embedding",
            d.join("embedding.json").to_str().unwrap(),
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "SpaceMismatch");
}

#[test]
fn replay_honors_a_new_output_directory() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    assert!(run_in(first.path(), &["gen", "--family", "gw-tree", "--size", "12", "--seed", "9"]).status.success());
    let manifest = first.path().join("gen.manifest.json");
    let out = run_in(second.path(), &["replay", manifest.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(
        std::fs::read(first.path().join("space.json")).unwrap(),
        std::fs::read(second.path().join("space.json")).unwrap()
    );
}
