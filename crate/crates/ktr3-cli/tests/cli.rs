//! End-to-end tests of the compiled binary: exit codes, file outputs, and
//! determinism of the experiment artifacts.

use std::path::Path;
use std::process::{Command, Output};

fn ktr3(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ktr3"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.ini");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn gen_writes_train_and_test_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("data");
    let out = ktr3(&["gen", "--out", out_dir.to_str().unwrap(), "--n", "30", "--seed", "42"]);
    assert_eq!(code(&out), 0, "{out:?}");

    let train = out_dir.join("train_n00030_seed000000000000002a.csv");
    let test = out_dir.join("test_n00300_seed000000000000002a.csv");
    assert!(train.is_file());
    assert!(test.is_file());
    let text = stdout(&out);
    assert!(text.contains("train_n00030_seed000000000000002a.csv (30 rows)"));
    assert!(text.contains("test_n00300_seed000000000000002a.csv (300 rows)"));

    let body = std::fs::read_to_string(train).unwrap();
    assert!(body.starts_with("x,y,f_star\n"));
    assert_eq!(body.lines().count(), 31);
}

#[test]
fn check_emits_json_reports_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[check]\ninstances = 3\nmax_n = 12\n");
    let out_dir = dir.path().join("reports");
    let out = ktr3(&[
        "check",
        "--config",
        &cfg,
        "--seed",
        "9",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{out:?}");

    let text = stdout(&out);
    let mut names = std::collections::BTreeSet::new();
    for line in text.lines() {
        let report: serde_json::Value = serde_json::from_str(line).expect("json line");
        for key in ["name", "lhs", "rhs", "relation", "tolerance", "passed", "seed"] {
            assert!(report.get(key).is_some(), "missing {key} in {line}");
        }
        assert_eq!(report["passed"], serde_json::Value::Bool(true));
        names.insert(report["name"].as_str().unwrap().to_string());
    }
    for expected in [
        "online_objective_identity",
        "sum_dt_bound",
        "scalar_log_bound",
        "logdet_expectation_bound",
        "truncation_dominance",
    ] {
        assert!(names.contains(expected), "no {expected} report");
    }

    let mirrored = std::fs::read_to_string(out_dir.join("checks.jsonl")).unwrap();
    assert_eq!(mirrored, text);
}

#[test]
fn tampering_with_leverage_breaks_the_identity() {
    let out = ktr3(&["check", "--tamper-dt", "--seed", "4"]);
    assert_eq!(code(&out), 1, "{out:?}");
    let text = stdout(&out);
    let report: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
    assert_eq!(report["passed"], serde_json::Value::Bool(false));
    let err = String::from_utf8(out.stderr.clone()).unwrap();
    assert!(err.contains("1 of 1 checks failed"), "{err}");
}

#[test]
fn rates_produces_deterministic_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[experiment]\nn_min = 24\nn_max = 60\nn_points = 3\nrepetitions = 2\n\
         lambda_grid = 1e-4, 1e-2\nseed = 11\n",
    );
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    for out_dir in [&first, &second] {
        let out = ktr3(&["rates", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{out:?}");
        assert!(out_dir.join("results.csv").is_file());
        assert!(out_dir.join("rates.svg").is_file());
        assert!(out_dir.join("summary.json").is_file());
    }
    for name in ["results.csv", "summary.json", "rates.svg"] {
        let a = std::fs::read(first.join(name)).unwrap();
        let b = std::fs::read(second.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }

    let csv = std::fs::read_to_string(first.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("n,lambda,rep,seed,excess_risk,std_error,mode,elapsed_ms")
    );
    // 3 sizes, 2 lambdas, 2 repetitions; timing is off by default.
    assert_eq!(lines.clone().count(), 12);
    assert!(lines.all(|l| l.ends_with(",k_average,0")));

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(first.join("summary.json")).unwrap())
            .unwrap();
    assert!(summary["slope"].as_f64().unwrap() < 0.0);
    assert_eq!(summary["reference_slope"].as_f64().unwrap(), -0.875);
    assert_eq!(summary["points"].as_array().unwrap().len(), 3);
}

#[test]
fn svg_rendering_can_be_disabled() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[experiment]\nn_min = 24\nn_max = 60\nn_points = 3\nrepetitions = 1\n\
         lambda_grid = 1e-2\nseed = 11\n[output]\nsvg = false\n",
    );
    let out_dir = dir.path().join("plain");
    let out = ktr3(&["rates", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{out:?}");
    assert!(out_dir.join("results.csv").is_file());
    assert!(!out_dir.join("rates.svg").exists());
}

#[test]
fn sweep_prints_grid_and_writes_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = ktr3(&[
        "sweep",
        "--n",
        "32",
        "--seed",
        "3",
        "--lambda",
        "0,1e-3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
    let text = stdout(&out);
    assert!(text.contains("lambda=0 mean_excess="), "{text}");
    assert!(text.contains("lambda=1e-3 mean_excess="), "{text}");
    assert!(text.contains("best_lambda="), "{text}");

    let csv = std::fs::read_to_string(dir.path().join("sweep_n00032.csv")).unwrap();
    // header + 2 lambdas x 5 default repetitions
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn usage_and_config_errors_exit_two() {
    let out = ktr3(&["sweep"]);
    assert_eq!(code(&out), 2);

    let out = ktr3(&["rates", "--out", "/tmp/x", "--risk-mode", "bogus"]);
    assert_eq!(code(&out), 2);

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[experiment]\nn_mim = 10\n");
    let out = ktr3(&["sweep", "--n", "16", "--config", &cfg]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("unknown config key"), "{err}");

    let out = ktr3(&["sweep", "--n", "16", "--lambda", "1e-3,huh"]);
    assert_eq!(code(&out), 2);
}
