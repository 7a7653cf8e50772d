use atmfusion::core::balance::{smote, SmoteConfig};
use atmfusion::core::features::{LabeledInstance, FEATURE_COUNT};
use atmfusion::core::fusion::{fit_stacking, StackingParams};
use atmfusion::core::learners::*;
use atmfusion::core::rng::Stream;
use atmfusion::core::simnet::TransactionRecord;
use atmfusion::io::*;

fn rows(n: usize, seed: u64) -> Vec<LabeledInstance> {
    let mut rng = Stream::new(seed, &[]);
    (0..n)
        .map(|i| {
            let x: Vec<f64> = (0..FEATURE_COUNT).map(|_| rng.unit()).collect();
            let y = u8::from(x[0] + x[5] > 0.6);
            LabeledInstance::observed(&format!("ATM-{:04}", i % 3), 1_700_000_000 + 300 * i as i64, x, y)
        })
        .collect()
}

#[test]
fn dataset_csv_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dataset.csv");
    let data = rows(200, 1);
    write_dataset(&path, &data, false).unwrap();
    assert_eq!(read_dataset(&path).unwrap(), data);

    let balanced = smote(&data, &SmoteConfig::default()).unwrap();
    let path = dir.path().join("balanced.csv");
    write_dataset(&path, &balanced.instances, true).unwrap();
    let back = read_dataset(&path).unwrap();
    assert_eq!(back, balanced.instances);
    assert!(back.iter().any(LabeledInstance::is_synthetic));

    let header = std::fs::read_to_string(&path).unwrap();
    assert_eq!(header.lines().next().unwrap(), dataset_header(true).join(","));
}

#[test]
fn synthetic_rows_need_the_flag_column() {
    let dir = tempfile::tempdir().unwrap();
    let balanced = smote(&rows(100, 2), &SmoteConfig::default()).unwrap();
    let err = write_dataset(&dir.path().join("x.csv"), &balanced.instances, false).unwrap_err();
    assert!(matches!(err, FormatError::Invalid { .. }));
}

#[test]
fn malformed_dataset_reports_path_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    let mut text = dataset_header(false).join(",");
    text.push_str("\nATM-0001,0,1,0.5,0.5,0.5,0.5,1,1\nATM-0001,300,1,0.5,zz,0.5,0.5,1,1\n");
    std::fs::write(&path, text).unwrap();
    let msg = read_dataset(&path).unwrap_err().to_string();
    assert!(msg.contains("bad.csv") && msg.contains("line 3"), "{msg}");

    std::fs::write(&path, "a,b\n1,2\n").unwrap();
    assert!(read_dataset(&path).unwrap_err().to_string().contains("unexpected header"));
}

#[test]
fn jsonl_round_trip_and_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tx.jsonl");
    let txs: Vec<TransactionRecord> = (0..5)
        .map(|i| TransactionRecord {
            atm_id: "ATM-0001".into(),
            ts: 100 + i,
            amount_class: (i % 4) as u8,
        })
        .collect();
    write_jsonl(&path, &txs).unwrap();
    assert_eq!(read_jsonl::<TransactionRecord>(&path).unwrap(), txs);

    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("{\"atm_id\": 3}\n");
    std::fs::write(&path, text).unwrap();
    match read_jsonl::<TransactionRecord>(&path).unwrap_err() {
        FormatError::Json { line, .. } => assert_eq!(line, 6),
        e => panic!("unexpected error {e}"),
    }
}

#[test]
fn predictions_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("predictions.csv");
    let preds = vec![
        PredictionRow {
            atm_id: "ATM-0002".into(),
            ts: 5,
            proba: 0.123_456_789_012_345_6,
            label: 0,
            truth: 1,
        },
        PredictionRow {
            atm_id: "ATM-0003".into(),
            ts: 6,
            proba: 1.0,
            label: 1,
            truth: 1,
        },
    ];
    write_predictions(&path, &preds).unwrap();
    assert_eq!(read_predictions(&path).unwrap(), preds);
    write_predictions(&path, &[]).unwrap();
    assert!(read_predictions(&path).unwrap().is_empty());
}

#[test]
fn model_files_round_trip_and_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    let data = rows(300, 3);
    let samples = Samples::from_instances(&data).unwrap();
    for kind in [ModelKind::Svm, ModelKind::Tree, ModelKind::Lgbm] {
        let m = train_default(kind, &samples, 1).unwrap();
        let path = dir.path().join(format!("{}.json", kind.name()));
        write_model(&path, &ModelFile::base(m.clone())).unwrap();
        let back = read_model(&path).unwrap();
        assert_eq!(back.model.as_ref(), Some(&m));
        for r in &data {
            assert_eq!(back.model.as_ref().unwrap().proba(&r.x), m.proba(&r.x));
        }
    }

    let params = StackingParams {
        models: ModelParams {
            forest: ForestParams {
                n_trees: 5,
                ..ForestParams::default()
            },
            lgbm: LeafWiseParams {
                n_rounds: 5,
                ..LeafWiseParams::default()
            },
            cat: ObliviousParams {
                n_rounds: 5,
                ..ObliviousParams::default()
            },
            ..ModelParams::default()
        },
        ..StackingParams::default()
    };
    let stacked = fit_stacking(&data, &params).unwrap();
    let path = dir.path().join("stack.json");
    write_model(&path, &ModelFile::stacked(stacked.clone())).unwrap();
    assert_eq!(read_model(&path).unwrap().stacking, Some(stacked));

    std::fs::write(&path, r#"{"format_version": 2, "model": null}"#).unwrap();
    assert!(read_model(&path).unwrap_err().to_string().contains("version 2"));
    std::fs::write(&path, r#"{"format_version": 1}"#).unwrap();
    assert!(read_model(&path).unwrap_err().to_string().contains("exactly one"));
}
