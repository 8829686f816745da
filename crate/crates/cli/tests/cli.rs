//! Runs the binary and checks outputs and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pathnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathnet")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

/// `relu(x₁) + relu(x₂)`: never negative, so every input is labeled +1.
const SUM_RELU: &str = r#"{
  "format_version": 1,
  "config": {"input_dim": 2, "hidden_widths": [2], "slope_neg": 0.0, "slope_pos": 1.0, "use_biases": false},
  "matrices": [[[1.0, 0.0], [0.0, 1.0]], [[1.0, 1.0]]]
}"#;

const CONFIG: &str = r#"{
  "seed": 11,
  "dataset": {"kind": "generator", "name": "quadrants", "m": 40},
  "network": {"input_dim": 2, "hidden_widths": [4]},
  "train": {"learning_rate": 0.05, "batch_size": 10, "max_iters": 5000, "init_std": 0.1}
}"#;

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn bound_reports_value() {
    let out = pathnet(&["bound", "--m", "10000", "--n", "10", "--s", "100", "--delta", "0.05"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert!((v["F"].as_f64().unwrap() - 0.158_940_681_906_299_3).abs() < 1e-12);
    assert_eq!(code(&pathnet(&["bound", "--m", "10", "--n", "1", "--s", "10"])), 2);
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let r = pathnet(&["generate", "--name", "spirals", "--m", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&r), 2);
    let cfg = write(dir.path(), "c.json", CONFIG);
    let r = pathnet(&["nsv", "--config", &cfg, "--delta", "2.0"]);
    assert_eq!(code(&r), 2);
}

#[test]
fn gate_refuses_without_zero_training_error() {
    let dir = tempfile::tempdir().unwrap();
    let w = write(dir.path(), "w.json", SUM_RELU);
    let d = write(dir.path(), "d.csv", "1.0,2.0,1\n0.5,0.5,-1\n");
    assert_eq!(code(&pathnet(&["nsv", "--weights", &w, "--data", &d])), 3);
    let cfg = write(dir.path(), "c.json", CONFIG);
    assert_eq!(code(&pathnet(&["nsv", "--config", &cfg, "--train.max_iters", "1"])), 3);
}

#[test]
fn zero_embedding_is_non_separable() {
    let dir = tempfile::tempdir().unwrap();
    let w = write(dir.path(), "w.json", SUM_RELU);
    let d = write(dir.path(), "d.csv", "1.0,2.0,1\n0.0,0.0,1\n");
    assert_eq!(code(&pathnet(&["nsv", "--weights", &w, "--data", &d])), 4);
}

#[test]
fn path_budget_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let w = write(dir.path(), "w.json", SUM_RELU);
    assert_eq!(code(&pathnet(&["wbar-check", "--weights", &w, "--budget", "1"])), 5);
    let out = pathnet(&["wbar-check", "--weights", &w]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["all_positive"], Value::Bool(false));
    assert_eq!(v["parity_all_positive"], Value::Bool(false));
}

#[test]
fn pipeline_run_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", CONFIG);
    let outdir = dir.path().join("run");
    let out = pathnet(&["nsv", "--config", &cfg, "--output_dir", outdir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["achieved_zero_training_error"], Value::Bool(true));
    let s = v["s"].as_u64().unwrap();
    assert!(s >= 1 && s <= 40);
    for f in ["record.json", "weights.json", "support.csv"] {
        assert!(outdir.join(f).exists(), "{f}");
    }

    // The saved network drives the other subcommands.
    let w = outdir.join("weights.json");
    let w = w.to_str().unwrap();
    let data = dir.path().join("d.csv");
    let data = data.to_str().unwrap();
    assert_eq!(code(&pathnet(&["generate", "--name", "quadrants", "--m", "30", "--seed", "3", "--out", data])), 0);
    let sig = pathnet(&["signatures", "--weights", w, "--data", data]);
    assert_eq!(code(&sig), 0);
    assert!(stdout_json(&sig)["unique"].as_u64().unwrap() <= 30);
    let gram = dir.path().join("k.csv");
    assert_eq!(code(&pathnet(&["kernel", "--weights", w, "--data", data, "--out", gram.to_str().unwrap()])), 0);
    assert_eq!(fs::read_to_string(&gram).unwrap().lines().count(), 30);
    assert!(gram.with_extension("json").exists());
    let grid = dir.path().join("g.csv");
    let r = pathnet(&["boundary", "--weights", w, "--data", data, "--resolution", "10", "--out", grid.to_str().unwrap()]);
    assert_eq!(code(&r), 0);
    assert_eq!(fs::read_to_string(&grid).unwrap().lines().count(), 101);
    let rec = pathnet(&["skeleton", "recover", "--weights", w, "--flip", "1:0"]);
    assert_eq!(code(&rec), 0, "{}", String::from_utf8_lossy(&rec.stderr));
    assert_eq!(code(&pathnet(&["skeleton", "recover", "--weights", w, "--flip", "9:0"])), 2);
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", CONFIG);
    let out = dir.path().join("sweep");
    let r = pathnet(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--sweep",
        r#"{"axis": "m", "values": [20, 40], "reps": 2}"#,
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "axis_value,rep,m,n,s,s_over_m,F,margin,zte");
    assert_eq!(csv.lines().count(), 5);
}
