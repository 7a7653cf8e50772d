//! Labeled instances in `[0,1]^6`, the feature correlation matrix and the
//! chronological train/test split.
//!
//! Feature order is fixed: status-file status, day of month, day type, time
//! of day, monthly transaction quantile, transaction-gap status.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::calendar::{Calendar, CivilDate, SECONDS_PER_DAY};
use crate::journal::{label_at, StatusTimeline};
use crate::math::sqrt;
use crate::simnet::{StatusSnapshot, TransactionRecord};
use crate::txstat::{replay_status, GapDetectorState};
use crate::{Error, Result, DOWN, UP};

pub const FEATURE_COUNT: usize = 6;
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "status_file",
    "day_of_month",
    "day_type",
    "time_of_day",
    "monthly_q",
    "tx_status",
];
pub const STATUS_FILE: usize = 0;
pub const TX_STATUS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InstanceKey {
    pub atm_id: String,
    pub ts: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledInstance {
    /// `None` for SMOTE-synthesized rows.
    pub key: Option<InstanceKey>,
    pub x: Vec<f64>,
    /// 1 = up, 0 = down.
    pub y: u8,
}

impl LabeledInstance {
    pub fn observed(atm_id: &str, ts: i64, x: Vec<f64>, y: u8) -> Self {
        LabeledInstance {
            key: Some(InstanceKey {
                atm_id: String::from(atm_id),
                ts,
            }),
            x,
            y,
        }
    }

    pub fn synthetic(x: Vec<f64>, y: u8) -> Self {
        LabeledInstance { key: None, x, y }
    }

    pub fn is_synthetic(&self) -> bool {
        self.key.is_none()
    }
}

pub fn encode_day_of_month(ts: i64) -> f64 {
    let d = CivilDate::from_epoch(ts);
    f64::from(d.day) / f64::from(d.days_in_month())
}

/// Within-month frequency of the date's day type.
pub fn encode_day_type(date: CivilDate, calendar: &Calendar) -> Result<f64> {
    let kind = calendar.day_type(date)?;
    let count = calendar.count_in_month(date, kind)?;
    Ok(f64::from(count) / f64::from(date.days_in_month()))
}

pub fn encode_time_of_day(ts: i64) -> f64 {
    ts.rem_euclid(SECONDS_PER_DAY) as f64 / SECONDS_PER_DAY as f64
}

/// Transaction counts per ATM for one month.
pub type MonthVolumes = BTreeMap<String, u64>;

/// Mid-rank percentile of `atm_id`'s count among all ATMs of the month.
pub fn encode_monthly_quantile(atm_id: &str, volumes: &MonthVolumes) -> Result<f64> {
    let own = *volumes
        .get(atm_id)
        .ok_or_else(|| Error::Domain(format!("no monthly volume for {atm_id}")))?;
    let n = volumes.len() as f64;
    let smaller = volumes.values().filter(|&&c| c < own).count() as f64;
    let ties = volumes.values().filter(|&&c| c == own).count() as f64;
    Ok((smaller + 0.5 * ties) / n)
}

/// Counts transactions per `(year, month)` and ATM; every ATM in `atm_ids`
/// appears in every month touched by `months`, with zero if idle.
pub fn monthly_volumes(
    transactions: &[TransactionRecord],
    atm_ids: &[String],
    months: impl IntoIterator<Item = (i32, u8)>,
) -> BTreeMap<(i32, u8), MonthVolumes> {
    let mut out: BTreeMap<(i32, u8), MonthVolumes> = BTreeMap::new();
    for m in months {
        let entry = out.entry(m).or_default();
        for id in atm_ids {
            entry.entry(id.clone()).or_insert(0);
        }
    }
    for t in transactions {
        let d = CivilDate::from_epoch(t.ts);
        *out.entry((d.year, d.month))
            .or_default()
            .entry(t.atm_id.clone())
            .or_insert(0) += 1;
    }
    out
}

/// What to do with ATMs whose gap detector could not be fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnfittablePolicy {
    #[default]
    Skip,
    /// Emit instances with the transaction status fixed to up.
    EmitUp,
}

pub struct DatasetInputs<'a> {
    pub snapshots: &'a [StatusSnapshot],
    pub transactions: &'a [TransactionRecord],
    pub gap_states: &'a [GapDetectorState],
    pub truth: &'a [StatusTimeline],
    pub calendar: &'a Calendar,
    pub policy: UnfittablePolicy,
}

/// One instance per status snapshot, sorted by `(atm_id, ts)`, labeled from
/// the journal truth.
pub fn build_dataset(inputs: &DatasetInputs<'_>) -> Result<Vec<LabeledInstance>> {
    let mut snaps_by_atm: BTreeMap<&str, Vec<&StatusSnapshot>> = BTreeMap::new();
    for s in inputs.snapshots {
        snaps_by_atm.entry(s.atm_id.as_str()).or_default().push(s);
    }
    let mut tx_by_atm: BTreeMap<&str, Vec<i64>> = BTreeMap::new();
    for t in inputs.transactions {
        tx_by_atm.entry(t.atm_id.as_str()).or_default().push(t.ts);
    }
    let truth: BTreeMap<&str, &StatusTimeline> =
        inputs.truth.iter().map(|t| (t.atm_id.as_str(), t)).collect();
    let states: BTreeMap<&str, &GapDetectorState> = inputs
        .gap_states
        .iter()
        .map(|g| (g.atm_id.as_str(), g))
        .collect();

    let atm_ids: Vec<String> = snaps_by_atm.keys().map(|s| s.to_string()).collect();
    let months = inputs.snapshots.iter().map(|s| {
        let d = CivilDate::from_epoch(s.ts);
        (d.year, d.month)
    });
    let volumes = monthly_volumes(inputs.transactions, &atm_ids, months);

    let mut day_type_cache: BTreeMap<CivilDate, f64> = BTreeMap::new();
    let mut missing = Vec::new();
    let mut out = Vec::with_capacity(inputs.snapshots.len());
    for (atm, mut snaps) in snaps_by_atm {
        snaps.sort_by_key(|s| s.ts);
        let Some(timeline) = truth.get(atm) else {
            let (a, b) = (snaps[0].ts, snaps[snaps.len() - 1].ts);
            missing.push(format!("{atm}: [{a}, {b}] (no truth)"));
            continue;
        };
        let unfit;
        let state = match states.get(atm) {
            Some(s) if s.is_fitted() => *s,
            _ if inputs.policy == UnfittablePolicy::Skip => continue,
            _ => {
                unfit = GapDetectorState {
                    atm_id: String::from(atm),
                    last_tx_ts: timeline.start_s(),
                    fit: None,
                };
                &unfit
            }
        };
        let mut txs = tx_by_atm.remove(atm).unwrap_or_default();
        txs.sort_unstable();
        let times: Vec<i64> = snaps.iter().map(|s| s.ts).collect();
        let origin = timeline.start_s().min(times[0]);
        let tx_flags = replay_status(state, &txs, &times, origin)?;

        let mut gap: Option<(i64, i64)> = None;
        for (snap, tx_up) in snaps.iter().zip(tx_flags) {
            let y = match label_at(timeline, snap.ts) {
                Ok(up) => up,
                Err(_) => {
                    gap = Some(gap.map_or((snap.ts, snap.ts), |(a, _)| (a, snap.ts)));
                    continue;
                }
            };
            let date = CivilDate::from_epoch(snap.ts);
            let day_type = match day_type_cache.get(&date) {
                Some(v) => *v,
                None => {
                    let v = encode_day_type(date, inputs.calendar)?;
                    day_type_cache.insert(date, v);
                    v
                }
            };
            let month = &volumes[&(date.year, date.month)];
            let x = alloc::vec![
                f64::from(u8::from(snap.reported_up)),
                encode_day_of_month(snap.ts),
                day_type,
                encode_time_of_day(snap.ts),
                encode_monthly_quantile(atm, month)?,
                f64::from(u8::from(tx_up)),
            ];
            out.push(LabeledInstance::observed(atm, snap.ts, x, if y { UP } else { DOWN }));
        }
        if let Some((a, b)) = gap {
            missing.push(format!("{atm}: [{a}, {b}]"));
        }
    }
    if !missing.is_empty() {
        return Err(Error::HorizonMismatch { missing });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    /// Row-major, `labels.len()` squared.
    pub values: Vec<Vec<f64>>,
    /// Zero-variance columns left out of the matrix.
    pub undefined: Vec<String>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.values[i][j])
    }
}

/// Pearson correlation over the named columns.
pub fn pearson_matrix(names: &[&str], columns: &[Vec<f64>]) -> Result<CorrelationMatrix> {
    let n = columns.first().map_or(0, Vec::len);
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let mut kept = Vec::new();
    let mut undefined = Vec::new();
    for (name, col) in names.iter().zip(columns) {
        let mean = col.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = col.iter().map(|v| v - mean).collect();
        let ss = centered.iter().map(|v| v * v).sum::<f64>();
        if ss > 0.0 {
            kept.push((name.to_string(), centered, sqrt(ss)));
        } else {
            undefined.push(name.to_string());
        }
    }
    let k = kept.len();
    let mut values = alloc::vec![alloc::vec![0.0; k]; k];
    for i in 0..k {
        values[i][i] = 1.0;
        for j in i + 1..k {
            let dot: f64 = kept[i].1.iter().zip(&kept[j].1).map(|(a, b)| a * b).sum();
            let r = (dot / (kept[i].2 * kept[j].2)).clamp(-1.0, 1.0);
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        labels: kept.into_iter().map(|(n, _, _)| n).collect(),
        values,
        undefined,
    })
}

/// Correlations among the six features plus the label column.
pub fn correlation_matrix(dataset: &[LabeledInstance]) -> Result<CorrelationMatrix> {
    let mut columns: Vec<Vec<f64>> = (0..=FEATURE_COUNT)
        .map(|_| Vec::with_capacity(dataset.len()))
        .collect();
    for inst in dataset {
        if inst.x.len() != FEATURE_COUNT {
            return Err(Error::DimensionMismatch {
                expected: FEATURE_COUNT,
                got: inst.x.len(),
            });
        }
        for (c, v) in columns.iter_mut().zip(&inst.x) {
            c.push(*v);
        }
        columns[FEATURE_COUNT].push(f64::from(inst.y));
    }
    let mut names: Vec<&str> = FEATURE_NAMES.to_vec();
    names.push("label");
    pearson_matrix(&names, &columns)
}

/// Per-ATM chronological split: the earliest `floor(ratio * n)` instances of
/// each ATM go to train.
pub fn split_train_test(
    dataset: &[LabeledInstance],
    ratio: f64,
) -> Result<(Vec<LabeledInstance>, Vec<LabeledInstance>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::DegenerateSplit(format!("ratio {ratio} outside (0,1)")));
    }
    let mut groups: BTreeMap<&str, Vec<&LabeledInstance>> = BTreeMap::new();
    for inst in dataset {
        let key = inst
            .key
            .as_ref()
            .ok_or_else(|| Error::DegenerateSplit("synthetic instances cannot be split".into()))?;
        groups.entry(key.atm_id.as_str()).or_default().push(inst);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (_, mut group) in groups {
        group.sort_by_key(|i| i.key.as_ref().map(|k| k.ts));
        let cut = crate::math::floor(ratio * group.len() as f64) as usize;
        train.extend(group[..cut].iter().map(|i| (*i).clone()));
        test.extend(group[cut..].iter().map(|i| (*i).clone()));
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::DegenerateSplit(format!(
            "split gives {} train and {} test instances",
            train.len(),
            test.len()
        )));
    }
    Ok((train, test))
}
