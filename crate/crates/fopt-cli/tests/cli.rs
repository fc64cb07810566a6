//! End-to-end tests of the `fopt` binary: exit codes, error channels, and
//! the on-disk artifacts each subcommand leaves behind.

use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn fopt(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fopt"))
        .args(args)
        .env_remove("FOPT_OUT_DIR")
        .current_dir(dir)
        .output()
        .expect("spawn fopt")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Drops the wall_ns column so traces from different runs can be compared.
fn strip_wall(trace: &str) -> String {
    trace
        .lines()
        .map(|l| match l.rsplit_once(',') {
            Some((rest, _)) => rest.to_string(),
            None => l.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn happy_run_exits_zero_and_prints_the_summary() {
    let dir = TempDir::new().unwrap();
    let out = fopt(
        &["run", "--objective", "quadratic", "--steps", "50", "--out-dir", "."],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));

    let stdout = stdout_of(&out);
    let summary: serde_json::Value = serde_json::from_str(&stdout).expect("stdout is one JSON doc");
    assert!(summary["final_loss"].is_number());
    assert!(summary["min_grad_rms"].is_number());
    assert_eq!(summary["steps"], 50);
    assert_eq!(summary["rejected_steps"], 0);

    let on_disk = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    assert_eq!(on_disk.trim_end(), stdout.trim_end(), "file and stdout agree");
}

#[test]
fn trace_carries_the_documented_header_and_one_row_per_step() {
    let dir = TempDir::new().unwrap();
    let out = fopt(
        &["run", "--objective", "quadratic", "--steps", "25", "--out-dir", "."],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));

    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next(),
        Some("step,loss,grad_rms,update_rms,eps_hat,wall_ns")
    );
    assert_eq!(lines.count(), 25, "one row per step");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = fopt(&["run", "--no-such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("--no-such-flag"));
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("fopt.conf"), "lr = 0.01\nturbo = yes\n").unwrap();
    let out = fopt(
        &["run", "--config", "fopt.conf", "--out-dir", "."],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("line 2"), "names the offending line: {err}");
    assert!(err.contains("unknown key 'turbo'"), "{err}");
}

#[test]
fn divergent_run_exits_with_runtime_code_and_names_the_step() {
    let dir = TempDir::new().unwrap();
    // adam's weight-decay pull is not clipped, so lr * lambda > 2 scales the
    // parameters by |1 - lr*lambda| > 1 per step until the rms guard trips
    let out = fopt(
        &[
            "run",
            "--variant",
            "adam",
            "--lr",
            "10",
            "--weight-decay-lambda",
            "1.0",
            "--steps",
            "500",
            "--out-dir",
            ".",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_of(&out);
    assert!(err.contains("diverged at step"), "{err}");

    // the partial trace survives for post-mortem inspection
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.lines().count() > 1, "trace holds the steps before the blow-up");
    assert!(trace.lines().count() < 100, "and stops well short of the requested 500");
}

#[test]
fn sweep_points_with_equal_values_produce_identical_artifacts() {
    let dir = TempDir::new().unwrap();
    let out = fopt(
        &[
            "sweep",
            "--axis",
            "beta1",
            "--values",
            "0.9,0.9",
            "--objective",
            "logreg",
            "--steps",
            "40",
            "--batch-size",
            "8",
            "--out-dir",
            ".",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));

    let a = std::fs::read_to_string(dir.path().join("point_000/trace.csv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("point_001/trace.csv")).unwrap();
    assert_eq!(strip_wall(&a), strip_wall(&b), "same value, same trajectory");

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sweep.json")).unwrap())
            .unwrap();
    let points = report["points"].as_array().unwrap();
    assert_eq!(points.len(), 2);
    assert_eq!(points[0]["metric"], points[1]["metric"]);
}

#[test]
fn unknown_sweep_axis_is_rejected() {
    let dir = TempDir::new().unwrap();
    let out = fopt(
        &["sweep", "--axis", "momentum", "--values", "0.1", "--out-dir", "."],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("unknown sweep axis 'momentum'"));
}

#[test]
fn unordered_checkpoints_are_rejected() {
    let dir = TempDir::new().unwrap();
    let out = fopt(
        &["converge", "--checkpoints", "100,50", "--out-dir", "."],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("strictly ascending"));
}

#[test]
fn missed_convergence_target_exits_one() {
    let dir = TempDir::new().unwrap();
    let out = fopt(
        &[
            "converge",
            "--objective",
            "quadratic",
            "--checkpoints",
            "20,40",
            "--target",
            "1e-30",
            "--out-dir",
            ".",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("convergence target missed"));

    // the report is still written and records the verdict
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("converge.json")).unwrap())
            .unwrap();
    assert_eq!(report["target_met"], serde_json::Value::Bool(false));
    assert_eq!(report["checkpoints"].as_array().unwrap().len(), 2);
}

#[test]
fn out_dir_env_var_is_honored_when_no_flag_is_given() {
    let work = TempDir::new().unwrap();
    let sink = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fopt"))
        .args(["run", "--objective", "quadratic", "--steps", "10"])
        .env("FOPT_OUT_DIR", sink.path())
        .current_dir(work.path())
        .output()
        .expect("spawn fopt");
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    assert!(sink.path().join("summary.json").exists());
    assert!(sink.path().join("trace.csv").exists());
    assert!(!work.path().join("summary.json").exists(), "working dir stays clean");
}

#[test]
fn fimlab_requires_per_example_gradients() {
    let dir = TempDir::new().unwrap();
    let out = fopt(
        &["fimlab", "--objective", "quadratic", "--out-dir", "."],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("no per-example gradients"));
}

#[test]
fn fimlab_report_covers_the_requested_batch_sizes() {
    let dir = TempDir::new().unwrap();
    let out = fopt(
        &[
            "fimlab",
            "--objective",
            "logreg",
            "--batch-sizes",
            "1,4",
            "--repeats",
            "3",
            "--ema-steps",
            "5",
            "--out-dir",
            ".",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fimlab.json")).unwrap())
            .unwrap();
    let sensitivity = report["batch_sensitivity"].as_array().unwrap();
    assert_eq!(sensitivity.len(), 2);
    assert_eq!(sensitivity[0]["batch_size"], 1);
    assert_eq!(
        sensitivity[0]["mean_relative_gap"], 0.0,
        "single-example batches have no averaging gap"
    );
    assert!(report["jensen"]["mean_gap"].is_number());
    assert_eq!(report["jensen"]["violations"], 0);
    assert!(report["dense"].is_object(), "logreg is small enough for dense diagnostics");
}

#[test]
fn dumped_dataset_roundtrips_through_the_columnar_reader() {
    let dir = TempDir::new().unwrap();
    let out = fopt(
        &[
            "run",
            "--objective",
            "logreg",
            "--features",
            "3",
            "--samples",
            "32",
            "--steps",
            "5",
            "--dump-dataset",
            "--out-dir",
            ".",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));

    let file = std::fs::File::open(dir.path().join("dataset.txt")).unwrap();
    let (names, cols) =
        fopt_core::objectives::read_columns(&mut BufReader::new(file)).expect("dump parses back");
    assert_eq!(names.len(), 4, "three features plus the label column");
    assert_eq!(cols.len(), 4);
    assert!(cols.iter().all(|c| c.len() == 32));
}

#[test]
fn dump_dataset_on_an_analytic_objective_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let out = fopt(
        &[
            "run",
            "--objective",
            "rosenbrock",
            "--steps",
            "5",
            "--dump-dataset",
            "--out-dir",
            ".",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("no dataset"));
}
