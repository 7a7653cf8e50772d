//! Drives the binary: stage commands composed through files, exit codes.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use atmfusion::io;
use atmfusion::report;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atmfusion"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = bin(args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn stages_compose_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name);
    std::fs::write(d("config.toml"), common::SMALL_TOML).unwrap();

    let printed = ok(&["simulate", "--config", p(&d("config.toml")), "--out", p(&d("world"))]);
    let horizon = printed.trim().strip_prefix("horizon ").unwrap().to_string();
    let (start, end) = horizon.split_once(',').unwrap();
    let (start, end): (i64, i64) = (start.parse().unwrap(), end.parse().unwrap());
    let cut = start + (end - start) * 7 / 10;
    let window = format!("{start},{cut}");

    ok(&[
        "label",
        "--journal",
        p(&d("world/journal.jsonl")),
        "--horizon",
        &horizon,
        "--out",
        p(&d("truth.jsonl")),
    ]);
    ok(&[
        "txstat",
        "fit",
        "--transactions",
        p(&d("world/transactions.jsonl")),
        "--truth",
        p(&d("truth.jsonl")),
        "--window",
        &window,
        "--out",
        p(&d("gapstate.json")),
    ]);
    ok(&[
        "features",
        "build",
        "--status",
        p(&d("world/status.jsonl")),
        "--transactions",
        p(&d("world/transactions.jsonl")),
        "--gapstate",
        p(&d("gapstate.json")),
        "--truth",
        p(&d("truth.jsonl")),
        "--config",
        p(&d("config.toml")),
        "--out",
        p(&d("dataset.csv")),
    ]);
    ok(&["features", "corr", "--dataset", p(&d("dataset.csv")), "--out", p(&d("corr.csv"))]);
    ok(&[
        "features",
        "split",
        "--dataset",
        p(&d("dataset.csv")),
        "--train",
        p(&d("train.csv")),
        "--test",
        p(&d("test.csv")),
    ]);
    ok(&["balance", "--in", p(&d("train.csv")), "--out", p(&d("balanced.csv"))]);
    for model in ["tree", "svm"] {
        ok(&[
            "train",
            "--model",
            model,
            "--train",
            p(&d("balanced.csv")),
            "--out",
            p(&d(&format!("{model}.json"))),
        ]);
    }
    for method in ["dcs", "knorae"] {
        ok(&[
            "fuse",
            "--method",
            method,
            "--pool",
            p(&d("tree.json")),
            p(&d("svm.json")),
            "--dsel",
            p(&d("train.csv")),
            "--test",
            p(&d("test.csv")),
            "--out",
            p(&d(&format!("{method}.csv"))),
        ]);
    }
    ok(&["eval", "metrics", "--predictions", p(&d("dcs.csv")), "--out", p(&d("metrics.json"))]);
    let kpis = ok(&["eval", "kpis", "--truth", p(&d("truth.jsonl"))]);

    // The composed files agree with the in-process pipeline stages.
    let dataset = io::read_dataset(&d("dataset.csv")).unwrap();
    let test = io::read_dataset(&d("test.csv")).unwrap();
    let train = io::read_dataset(&d("train.csv")).unwrap();
    assert_eq!(train.len() + test.len(), dataset.len());
    let balanced = io::read_dataset(&d("balanced.csv")).unwrap();
    let down = balanced.iter().filter(|r| r.y == 0).count();
    assert_eq!(2 * down, balanced.len());
    let preds = io::read_predictions(&d("dcs.csv")).unwrap();
    assert_eq!(preds.len(), test.len());
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d("metrics.json")).unwrap()).unwrap();
    let n = ["tp", "fp", "tn", "fn"]
        .iter()
        .map(|k| metrics["cm"][k].as_u64().unwrap())
        .sum::<u64>();
    assert_eq!(n as usize, test.len());
    assert!(kpis.lines().last().unwrap().starts_with("fleet,"));
}

#[test]
fn ks_subcommand_ranks_a_sample_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gaps.csv");
    let mut rng = atmfusion::core::rng::Stream::new(5, &[]);
    let mut text = String::from("gap\n");
    for _ in 0..2000 {
        text.push_str(&format!("{}\n", rng.exponential(120.0)));
    }
    std::fs::write(&path, text).unwrap();
    let out = ok(&["txstat", "ks", "--samples", p(&path)]);
    let last = out.lines().rfind(|l| !l.trim().is_empty()).unwrap();
    assert!(last.contains("normal") || last.contains("logistic"), "{out}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name);

    assert_eq!(bin(&["--help"]).status.code(), Some(0));
    assert_eq!(bin(&["pipeline", "--bogus"]).status.code(), Some(1));

    std::fs::write(d("bad.toml"), "[sim]\nn_atms = 0\n").unwrap();
    let out = bin(&["pipeline", "--config", p(&d("bad.toml")), "--out", p(&d("o"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config error"));

    let out = bin(&["pipeline", "--config", p(&d("missing.toml")), "--out", p(&d("o"))]);
    assert_eq!(out.status.code(), Some(1));

    let out = bin(&["balance", "--in", p(&d("missing.csv")), "--out", p(&d("b.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));

    // A world with no outages cannot be oversampled: a stage failure.
    std::fs::write(d("healthy.toml"), "[sim]\nn_atms = 2\nhorizon_days = 2\n[profile]\ndown_prevalence = 0.0\n").unwrap();
    let out = bin(&["pipeline", "--config", p(&d("healthy.toml")), "--out", p(&d("o"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pipeline_writes_bundle_and_check_sets_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.toml");
    std::fs::write(&cfg, common::SMALL_TOML).unwrap();
    let out_dir = dir.path().join("bundle");
    let out = bin(&["pipeline", "--config", p(&cfg), "--out", p(&out_dir), "--check", "--threads", "2"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout
        .lines()
        .filter(|l| l.starts_with("PASS ") || l.starts_with("FAIL "))
        .collect();
    assert_eq!(lines.len(), 8, "{stdout}");
    let failed = lines.iter().any(|l| l.starts_with("FAIL"));
    assert_eq!(out.status.code(), Some(if failed { 3 } else { 0 }));
    for name in [
        report::TABLE1,
        report::TABLE2,
        report::TABLE3,
        report::TABLE8,
        report::CORRELATION,
        report::KPIS,
        report::MANIFEST,
    ] {
        assert!(out_dir.join(name).is_file(), "{name} missing");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join(report::MANIFEST)).unwrap()).unwrap();
    assert_eq!(
        manifest["config_hash"].as_str().unwrap(),
        common::small_config().hash()
    );
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let default = atmfusion::ExperimentConfig::load(&root.join("default.toml")).unwrap();
    assert_eq!(default, atmfusion::ExperimentConfig::default());
    let reduced = atmfusion::ExperimentConfig::load(&root.join("reduced.toml")).unwrap();
    assert_eq!((reduced.sim.n_atms, reduced.sim.horizon_days), (20, 14));
}
