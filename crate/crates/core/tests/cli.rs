// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fedsketch"))
}

fn small_config(dir: &Path, dim: usize, rounds: usize) -> PathBuf {
    let cfg = json!({
        "data": {
            "num_devices": 12,
            "samples_mean": 40.0,
            "samples_stdev": 20.0,
            "feature_dim": dim,
            "heterogeneity_alpha": 1.0,
            "heterogeneity_beta": 1.0,
            "label_noise": 0.0,
            "test_fraction": 0.2,
            "seed": 3
        },
        "model": { "kind": "linear" },
        "fed": {
            "num_rounds": rounds,
            "devices_per_round": 4,
            "sgd": { "learning_rate": 0.01, "batch_size": 10, "local_epochs": 1, "rng_seed": 0 },
            "algorithm": "vanilla",
            "rng_seed": 11
        },
        "output_dir": dir.join("default_out")
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn run_writes_one_metrics_row_per_round() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 5, 5);
    let out = tmp.path().join("o");
    run_ok(&["run", "--config", s(&cfg), "--out", s(&out)]);
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 6);
    assert!(out.join("resolved_config.json").is_file());
}

#[test]
fn output_directory_defaults_to_the_config_value() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 4, 2);
    run_ok(&["run", "--config", s(&cfg)]);
    assert!(tmp.path().join("default_out/metrics.csv").is_file());
}

#[test]
fn rerunning_the_resolved_config_reproduces_metrics_bytewise() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 6, 8);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&[
        "run",
        "--config",
        s(&cfg),
        "--out",
        s(&a),
        "--compression",
        "2",
    ]);
    run_ok(&[
        "run",
        "--config",
        s(&a.join("resolved_config.json")),
        "--out",
        s(&b),
    ]);
    for f in ["metrics.csv", "diagnostics.csv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let (ra, rb) = (
        read_json(&a.join("resolved_config.json")),
        read_json(&b.join("resolved_config.json")),
    );
    assert_eq!(ra["fed"], rb["fed"]);
    assert_eq!(ra["data"], rb["data"]);
}

#[test]
fn seed_flag_changes_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 6, 4);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&["run", "--config", s(&cfg), "--out", s(&a), "--seed", "1"]);
    run_ok(&["run", "--config", s(&cfg), "--out", s(&b), "--seed", "2"]);
    assert_ne!(
        std::fs::read(a.join("metrics.csv")).unwrap(),
        std::fs::read(b.join("metrics.csv")).unwrap()
    );
}

#[test]
fn compression_ten_with_6010_parameters_resolves_width_121() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 6009, 0);
    let out = tmp.path().join("o");
    run_ok(&[
        "run",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--compression",
        "10",
    ]);
    let resolved = read_json(&out.join("resolved_config.json"));
    assert_eq!(resolved["fed"]["algorithm"], "sketched");
    assert_eq!(resolved["fed"]["sketch"]["rows"], 5);
    assert_eq!(resolved["fed"]["sketch"]["width"], 121);
}

#[test]
fn dotted_overrides_reach_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 4, 5);
    let out = tmp.path().join("o");
    run_ok(&[
        "run",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--fed.num_rounds",
        "3",
    ]);
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 4);
}

#[test]
fn sweep_writes_one_run_per_ratio_and_a_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 60, 6);
    let out = tmp.path().join("sweep");
    run_ok(&[
        "sweep",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--compressions",
        "1,10,25",
    ]);
    for r in ["ratio_1", "ratio_10", "ratio_25"] {
        assert!(out.join(r).join("metrics.csv").is_file(), "{r}");
    }
    let summary = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("ratio,final_accuracy,total_bytes"));
    let bytes: Vec<u64> = lines
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(bytes.len(), 3);
    assert!(bytes.windows(2).all(|w| w[0] > w[1]), "{bytes:?}");
}

#[test]
fn configuration_errors_exit_with_code_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 4, 2);
    let out = tmp.path().join("o");

    let too_many = bin()
        .args(["run", "--config", s(&cfg), "--out", s(&out)])
        .args(["--fed.devices_per_round", "13"])
        .output()
        .unwrap();
    assert_eq!(too_many.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&too_many.stderr).contains("devices_per_round"));

    for ratios in ["0", "-2", "1,abc"] {
        let bad = bin()
            .args([
                "sweep",
                "--config",
                s(&cfg),
                "--out",
                s(&out),
                "--compressions",
                ratios,
            ])
            .output()
            .unwrap();
        assert_eq!(bad.status.code(), Some(1), "{ratios}");
    }

    let mut doc = read_json(&cfg);
    doc["fed"]["compression"] = json!(10.0);
    doc["fed"]["sketch"] = json!({ "rows": 5, "width": 3, "seed": 1 });
    let both = tmp.path().join("both.json");
    std::fs::write(&both, doc.to_string()).unwrap();
    let clash = bin()
        .args(["run", "--config", s(&both), "--out", s(&out)])
        .output()
        .unwrap();
    assert_eq!(clash.status.code(), Some(1));

    let missing = bin()
        .args(["run", "--config", s(&tmp.path().join("nope.json"))])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 4, 2);
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "not a directory").unwrap();
    let out = bin()
        .args(["run", "--config", s(&cfg), "--out", s(&blocker.join("sub"))])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
