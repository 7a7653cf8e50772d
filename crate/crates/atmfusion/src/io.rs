//! File formats: JSONL record streams, dataset and prediction CSVs, model
//! JSON.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use atmfusion_core::features::{LabeledInstance, FEATURE_COUNT, FEATURE_NAMES};
use atmfusion_core::fusion::StackModel;
use atmfusion_core::learners::TrainedModel;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("{path}: {msg}")]
    Invalid { path: PathBuf, msg: String },
}

type Result<T> = std::result::Result<T, FormatError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> FormatError + '_ {
    move |source| FormatError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn invalid(path: &Path, msg: impl Into<String>) -> FormatError {
    FormatError::Invalid {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(bytes).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = create(path)?;
    for (i, item) in items.iter().enumerate() {
        serde_json::to_writer(&mut w, item).map_err(|source| FormatError::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| FormatError::Json {
                path: path.to_path_buf(),
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| FormatError::Json {
        path: path.to_path_buf(),
        line: 0,
        source,
    })?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| FormatError::Json {
        path: path.to_path_buf(),
        line: source.line(),
        source,
    })
}

/// Dataset header; balanced files append a `synthetic` column.
pub fn dataset_header(with_synthetic: bool) -> Vec<&'static str> {
    let mut h = vec!["atm_id", "ts"];
    h.extend(FEATURE_NAMES);
    h.push("label");
    if with_synthetic {
        h.push("synthetic");
    }
    h
}

/// Writes instances as dataset CSV. The `synthetic` column is added when
/// `with_synthetic` is set; synthetic rows leave `atm_id` and `ts` empty.
pub fn write_dataset(path: &Path, rows: &[LabeledInstance], with_synthetic: bool) -> Result<()> {
    if !with_synthetic && rows.iter().any(LabeledInstance::is_synthetic) {
        return Err(invalid(path, "synthetic rows need the synthetic column"));
    }
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(dataset_header(with_synthetic)).map_err(csv_err(path))?;
    let mut record: Vec<String> = Vec::with_capacity(FEATURE_COUNT + 4);
    for row in rows {
        record.clear();
        match &row.key {
            Some(k) => {
                record.push(k.atm_id.clone());
                record.push(k.ts.to_string());
            }
            None => {
                record.push(String::new());
                record.push(String::new());
            }
        }
        record.extend(row.x.iter().map(|v| v.to_string()));
        record.push(row.y.to_string());
        if with_synthetic {
            record.push(u8::from(row.is_synthetic()).to_string());
        }
        w.write_record(&record).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a dataset CSV, with or without the `synthetic` column.
pub fn read_dataset(path: &Path) -> Result<Vec<LabeledInstance>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = r
        .headers()
        .map_err(csv_err(path))?
        .iter()
        .map(str::to_string)
        .collect();
    let with_synthetic = if header == dataset_header(false) {
        false
    } else if header == dataset_header(true) {
        true
    } else {
        return Err(invalid(
            path,
            format!("unexpected header {:?}, want {}", header, dataset_header(false).join(",")),
        ));
    };
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let line = i + 2;
        let bad = |what: &str| invalid(path, format!("line {line}: bad {what}"));
        let x = (0..FEATURE_COUNT)
            .map(|f| rec[2 + f].parse::<f64>().map_err(|_| bad(FEATURE_NAMES[f])))
            .collect::<Result<Vec<f64>>>()?;
        let y: u8 = match &rec[2 + FEATURE_COUNT] {
            "0" => 0,
            "1" => 1,
            _ => return Err(bad("label")),
        };
        let synthetic = with_synthetic
            && match &rec[3 + FEATURE_COUNT] {
                "0" => false,
                "1" => true,
                _ => return Err(bad("synthetic flag")),
            };
        out.push(if synthetic {
            LabeledInstance::synthetic(x, y)
        } else {
            let ts = rec[1].parse::<i64>().map_err(|_| bad("ts"))?;
            LabeledInstance::observed(&rec[0], ts, x, y)
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub atm_id: String,
    pub ts: i64,
    /// Probability of up.
    pub proba: f64,
    pub label: u8,
    pub truth: u8,
}

pub fn write_predictions(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    if rows.is_empty() {
        w.write_record(["atm_id", "ts", "proba", "label", "truth"])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize()
        .map(|row| row.map_err(csv_err(path)))
        .collect()
}

/// On-disk model: either one base model or a stacked ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<TrainedModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stacking: Option<StackModel>,
}

impl ModelFile {
    pub fn base(model: TrainedModel) -> Self {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            model: Some(model),
            stacking: None,
        }
    }

    pub fn stacked(model: StackModel) -> Self {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            model: None,
            stacking: Some(model),
        }
    }
}

pub fn write_model(path: &Path, file: &ModelFile) -> Result<()> {
    let mut text = serde_json::to_string(file).map_err(|source| FormatError::Json {
        path: path.to_path_buf(),
        line: 0,
        source,
    })?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let file: ModelFile = read_json(path)?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(invalid(
            path,
            format!("unsupported model format version {}", file.format_version),
        ));
    }
    if file.model.is_some() == file.stacking.is_some() {
        return Err(invalid(path, "model file must hold exactly one of model/stacking"));
    }
    Ok(file)
}
