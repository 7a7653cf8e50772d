//! Report bundle rendering: CSV tables plus a JSON manifest.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::experiment::{KsRow, Outcome, Scored, Summary};
use crate::io::{write_bytes, FormatError};

pub const TABLE1: &str = "table1_ks.csv";
pub const TABLE2: &str = "table2_baselines.csv";
pub const TABLE3: &str = "table3_smote.csv";
pub const TABLE8: &str = "table8_models.csv";
pub const CORRELATION: &str = "correlation.csv";
pub const KPIS: &str = "kpis.csv";
pub const MANIFEST: &str = "manifest.json";

/// Fixed six decimals; undefined values become an empty field.
pub fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.6}"),
        _ => String::new(),
    }
}

const METRIC_COLUMNS: [&str; 16] = [
    "accuracy",
    "precision_down",
    "recall_down",
    "f1_down",
    "precision_up",
    "recall_up",
    "f1_up",
    "macro_precision",
    "macro_recall",
    "macro_f1",
    "false_alarm_rate",
    "missed_alarm_rate",
    "tp",
    "fp",
    "tn",
    "fn",
];

fn metric_fields(s: &Scored) -> Vec<String> {
    let m = &s.metrics;
    let mut v: Vec<String> = [
        m.accuracy,
        m.down.precision,
        m.down.recall,
        m.down.f1,
        m.up.precision,
        m.up.recall,
        m.up.f1,
        m.macro_precision,
        m.macro_recall,
        m.macro_f1,
        s.false_alarm_rate,
        s.missed_alarm_rate,
    ]
    .into_iter()
    .map(fmt_opt)
    .collect();
    v.extend([s.cm.tp, s.cm.fp, s.cm.tn, s.cm.fn_].map(|c| c.to_string()));
    v
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

fn scored_table(lead: &[&str], rows: &[Scored], lead_of: impl Fn(&Scored) -> Vec<String>) -> String {
    let mut header = lead.to_vec();
    header.extend(METRIC_COLUMNS);
    csv_text(
        &header,
        rows.iter().map(|s| {
            let mut r = lead_of(s);
            r.extend(metric_fields(s));
            r
        }),
    )
}

pub fn table1(rows: &[KsRow]) -> String {
    csv_text(
        &["family", "n_atms", "mean_d", "min_d", "max_d", "best_count"],
        rows.iter().map(|r| {
            vec![
                r.family.to_string(),
                r.n_atms.to_string(),
                fmt_opt(r.mean_d),
                fmt_opt(r.min_d),
                fmt_opt(r.max_d),
                r.best_count.to_string(),
            ]
        }),
    )
}

pub fn table2(rows: &[Scored]) -> String {
    scored_table(&["source", "scope"], rows, |s| vec![s.name.clone(), s.scope.clone()])
}

pub fn table3(rows: &[Scored]) -> String {
    scored_table(&["model", "smote"], rows, |s| vec![s.name.clone(), s.scope.clone()])
}

pub fn table8(rows: &[Scored]) -> String {
    scored_table(&["model"], rows, |s| vec![s.name.clone()])
}

pub fn correlation(m: &atmfusion_core::features::CorrelationMatrix) -> String {
    let mut header = vec![""];
    header.extend(m.labels.iter().map(String::as_str));
    csv_text(
        &header,
        m.labels.iter().zip(&m.values).map(|(l, row)| {
            let mut r = vec![l.clone()];
            r.extend(row.iter().map(|v| fmt_opt(Some(*v))));
            r
        }),
    )
}

pub fn kpi_table(rows: &[(String, atmfusion_core::eval::KpiReport)]) -> String {
    csv_text(
        &[
            "atm_id",
            "up_s",
            "down_s",
            "n_outages",
            "availability",
            "mttf_s",
            "mttr_s",
            "reliability_24h",
        ],
        rows.iter().map(|(id, k)| {
            vec![
                id.clone(),
                k.up_s.to_string(),
                k.down_s.to_string(),
                k.n_outages.to_string(),
                fmt_opt(Some(k.availability)),
                fmt_opt(k.mttf_s),
                fmt_opt(k.mttr_s),
                fmt_opt(Some(k.reliability_at(86_400.0))),
            ]
        }),
    )
}

#[derive(Debug, Serialize)]
struct Seeds {
    sim: u64,
    smote: u64,
    bagging: u64,
    forest: u64,
    dsel: u64,
    stacking_folds: u64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    config_hash: String,
    seeds: Seeds,
    summary: &'a Summary,
    files: BTreeMap<&'static str, String>,
    config: &'a ExperimentConfig,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// File name to contents, in a fixed order.
pub fn render(outcome: &Outcome) -> BTreeMap<&'static str, Vec<u8>> {
    let mut files: BTreeMap<&'static str, Vec<u8>> = BTreeMap::new();
    files.insert(TABLE1, table1(&outcome.ks).into_bytes());
    files.insert(TABLE2, table2(&outcome.baselines).into_bytes());
    files.insert(TABLE3, table3(&outcome.ablation).into_bytes());
    files.insert(TABLE8, table8(&outcome.models).into_bytes());
    files.insert(CORRELATION, correlation(&outcome.correlation).into_bytes());
    files.insert(KPIS, kpi_table(&outcome.kpis).into_bytes());
    let cfg = &outcome.config;
    let manifest = Manifest {
        config_hash: cfg.hash(),
        seeds: Seeds {
            sim: cfg.sim.seed,
            smote: cfg.smote.seed,
            bagging: cfg.models.bagging.seed,
            forest: cfg.models.forest.seed,
            dsel: cfg.fusion.dsel_seed,
            stacking_folds: cfg.fusion.stacking_seed,
        },
        summary: &outcome.summary,
        files: files.iter().map(|(k, v)| (*k, sha256_hex(v))).collect(),
        config: cfg,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    files.insert(MANIFEST, text.into_bytes());
    files
}

pub fn write_bundle(dir: &Path, files: &BTreeMap<&'static str, Vec<u8>>) -> Result<(), FormatError> {
    for (name, bytes) in files {
        write_bytes(&dir.join(name), bytes)?;
    }
    Ok(())
}
