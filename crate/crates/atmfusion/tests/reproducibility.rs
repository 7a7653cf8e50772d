mod common;

use std::collections::BTreeMap;

use atmfusion::report::{self, render};
use atmfusion::run_with_threads;

#[test]
fn bundle_bytes_do_not_depend_on_thread_count() {
    let cfg = common::small_config();
    let one = render(&run_with_threads(&cfg, Some(1)).unwrap());
    let again = render(&run_with_threads(&cfg, Some(1)).unwrap());
    let three = render(&run_with_threads(&cfg, Some(3)).unwrap());
    assert_eq!(one, again);
    assert_eq!(one, three);
}

#[test]
fn cli_runs_write_identical_directories() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.toml");
    std::fs::write(&cfg, common::SMALL_TOML).unwrap();
    let mut bundles = Vec::new();
    for (i, threads) in ["1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let run = std::process::Command::new(env!("CARGO_BIN_EXE_atmfusion"))
            .args(["pipeline", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .args(["--threads", threads])
            .output()
            .unwrap();
        assert!(run.status.success());
        let files: BTreeMap<String, Vec<u8>> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        bundles.push(files);
    }
    assert_eq!(bundles[0].len(), 7);
    assert_eq!(bundles[0], bundles[1]);

    // The manifest hashes each table it lists.
    let manifest: serde_json::Value = serde_json::from_slice(&bundles[0][report::MANIFEST]).unwrap();
    let listed = manifest["files"].as_object().unwrap();
    assert_eq!(listed.len(), 6);
    for (name, digest) in listed {
        assert_eq!(digest.as_str().unwrap(), report::sha256_hex(&bundles[0][name]));
    }
}

#[test]
fn different_seed_changes_the_bundle() {
    let cfg = common::small_config();
    let mut other = cfg.clone();
    other.sim.seed += 1;
    assert_ne!(cfg.hash(), other.hash());
    let a = render(&run_with_threads(&cfg, Some(2)).unwrap());
    let b = render(&run_with_threads(&other, Some(2)).unwrap());
    assert_ne!(a[report::TABLE2], b[report::TABLE2]);
}
