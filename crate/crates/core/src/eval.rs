//! Confusion matrices, per-class and macro metrics, alarm rates and
//! reliability KPIs. "Down" is the positive class throughout.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::features::InstanceKey;
use crate::journal::StatusTimeline;
use crate::math::exp;
use crate::{Error, Result, DOWN};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// Truth down, predicted down.
    pub tp: u64,
    /// Truth up, predicted down.
    pub fp: u64,
    /// Truth up, predicted up.
    pub tn: u64,
    /// Truth down, predicted up.
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn add(&mut self, predicted: u8, truth: u8) {
        match (truth == DOWN, predicted == DOWN) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn from_labels(predicted: &[u8], truth: &[u8]) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                got: predicted.len(),
            });
        }
        let mut cm = ConfusionMatrix::default();
        for (&p, &t) in predicted.iter().zip(truth) {
            cm.add(p, t);
        }
        Ok(cm)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// The same counts with "up" as the positive class.
    pub fn up_view(&self) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tn,
            fp: self.fn_,
            tn: self.tp,
            fn_: self.fp,
        }
    }
}

/// Confusion matrix over predictions and truth keyed by `(atm_id, ts)`.
/// Both sides must carry exactly the same keys.
pub fn confusion(
    predictions: &[(InstanceKey, u8)],
    truth: &[(InstanceKey, u8)],
) -> Result<ConfusionMatrix> {
    let truth_map: BTreeMap<&InstanceKey, u8> = truth.iter().map(|(k, y)| (k, *y)).collect();
    let pred_map: BTreeMap<&InstanceKey, u8> = predictions.iter().map(|(k, y)| (k, *y)).collect();
    let mut examples = Vec::new();
    for k in pred_map.keys().filter(|k| !truth_map.contains_key(*k)) {
        examples.push(format!("{}@{} has no truth", k.atm_id, k.ts));
    }
    for k in truth_map.keys().filter(|k| !pred_map.contains_key(*k)) {
        examples.push(format!("{}@{} has no prediction", k.atm_id, k.ts));
    }
    if pred_map.len() != predictions.len() || truth_map.len() != truth.len() {
        examples.push(String::from("duplicate keys"));
    }
    if !examples.is_empty() {
        examples.truncate(5);
        return Err(Error::KeyMismatch { examples });
    }
    let mut cm = ConfusionMatrix::default();
    for (k, &p) in &pred_map {
        cm.add(p, truth_map[k]);
    }
    Ok(cm)
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}


/// Mean of the defined values, `None` if none are defined.
fn macro_mean(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) => Some((a + b) / 2.0),
        (Some(v), None) | (None, Some(v)) => Some(v),
        (None, None) => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

impl ClassMetrics {
    fn of(cm: &ConfusionMatrix) -> Self {
        let precision = ratio(cm.tp, cm.tp + cm.fp);
        let recall = ratio(cm.tp, cm.tp + cm.fn_);
        // Count form of the harmonic mean: still defined (as 0) when the
        // class is never predicted but does occur.
        ClassMetrics {
            precision,
            recall,
            f1: ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn_),
        }
    }
}

/// Per-class and macro-averaged metrics. `None` marks a 0/0 value; such
/// values are left out of the macro averages and noted in `warnings`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub down: ClassMetrics,
    pub up: ClassMetrics,
    pub macro_precision: Option<f64>,
    pub macro_recall: Option<f64>,
    pub macro_f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub warnings: Vec<String>,
}

pub fn metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let down = ClassMetrics::of(cm);
    let up = ClassMetrics::of(&cm.up_view());
    let mut warnings = Vec::new();
    for (class, m) in [("down", &down), ("up", &up)] {
        for (name, v) in [("precision", m.precision), ("recall", m.recall), ("f1", m.f1)] {
            if v.is_none() {
                warnings.push(format!("{name}({class}) undefined"));
            }
        }
    }
    MetricsReport {
        macro_precision: macro_mean(down.precision, up.precision),
        macro_recall: macro_mean(down.recall, up.recall),
        macro_f1: macro_mean(down.f1, up.f1),
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
        down,
        up,
        warnings,
    }
}

/// Fraction of truly-up instances predicted down.
pub fn false_alarm_rate(cm: &ConfusionMatrix) -> Option<f64> {
    ratio(cm.fp, cm.fp + cm.tn)
}

/// Fraction of truly-down instances predicted up.
pub fn missed_alarm_rate(cm: &ConfusionMatrix) -> Option<f64> {
    ratio(cm.fn_, cm.fn_ + cm.tp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub up_s: i64,
    pub down_s: i64,
    pub n_outages: u64,
    pub availability: f64,
    /// `None` when there were no outages (unbounded).
    pub mttf_s: Option<f64>,
    pub mttr_s: Option<f64>,
}

impl KpiReport {
    /// `exp(-t / MTTF)`; identically 1 without outages.
    pub fn reliability_at(&self, t_s: f64) -> f64 {
        match self.mttf_s {
            Some(m) if m > 0.0 => exp(-t_s / m),
            Some(_) => 0.0,
            None => 1.0,
        }
    }

    fn from_totals(up_s: i64, down_s: i64, n_outages: u64) -> Result<Self> {
        let horizon = up_s + down_s;
        if horizon <= 0 {
            return Err(Error::Domain("timeline has no positive horizon".into()));
        }
        let per = |v: i64| (n_outages > 0).then(|| v as f64 / n_outages as f64);
        Ok(KpiReport {
            up_s,
            down_s,
            n_outages,
            availability: up_s as f64 / horizon as f64,
            mttf_s: per(up_s),
            mttr_s: per(down_s),
        })
    }
}

pub fn kpis(timeline: &StatusTimeline) -> Result<KpiReport> {
    let (up, down) = timeline.durations();
    KpiReport::from_totals(up, down, timeline.down_spans().count() as u64)
}

/// KPIs pooled over a fleet: times and outage counts are summed first.
pub fn fleet_kpis(timelines: &[StatusTimeline]) -> Result<KpiReport> {
    let (mut up, mut down, mut n) = (0, 0, 0);
    for t in timelines {
        let (u, d) = t.durations();
        up += u;
        down += d;
        n += t.down_spans().count() as u64;
    }
    KpiReport::from_totals(up, down, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::journal::Span;
    use crate::UP;
    use alloc::vec;

    #[test]
    fn precision_three_of_four() {
        let cm = ConfusionMatrix::from_labels(&[0, 0, 0, 0], &[0, 0, 0, 1]).unwrap();
        assert_eq!(metrics(&cm).down.precision, Some(0.75));
    }

    #[test]
    fn all_half() {
        let cm = ConfusionMatrix {
            tp: 1,
            fp: 1,
            tn: 1,
            fn_: 1,
        };
        let m = metrics(&cm);
        for v in [
            m.down.precision,
            m.down.recall,
            m.down.f1,
            m.up.precision,
            m.up.recall,
            m.up.f1,
            m.macro_precision,
            m.macro_recall,
            m.macro_f1,
            m.accuracy,
        ] {
            assert_eq!(v, Some(0.5));
        }
    }

    #[test]
    fn all_up_predictions_leave_down_precision_undefined() {
        let cm = ConfusionMatrix::from_labels(&[UP; 4], &[0, 1, 1, 1]).unwrap();
        let m = metrics(&cm);
        assert_eq!(cm.tp, 0);
        assert_eq!(m.down.precision, None);
        assert_eq!(m.macro_precision, m.up.precision);
        assert!(!m.warnings.is_empty());
    }

    #[test]
    fn kpi_definitions() {
        let h = 3600;
        let t = StatusTimeline {
            atm_id: "A".into(),
            intervals: vec![
                Span { start_s: 0, end_s: 40 * h, up: true },
                Span { start_s: 40 * h, end_s: 45 * h, up: false },
                Span { start_s: 45 * h, end_s: 95 * h, up: true },
                Span { start_s: 95 * h, end_s: 100 * h, up: false },
            ],
        };
        let k = kpis(&t).unwrap();
        assert!((k.availability - 0.9).abs() < 1e-12);
        assert_eq!(k.mttf_s, Some(45.0 * h as f64));
        assert_eq!(k.mttr_s, Some(5.0 * h as f64));
        assert!((k.reliability_at(45.0 * h as f64) - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn key_mismatch_is_reported() {
        let k = |ts| InstanceKey { atm_id: "A".into(), ts };
        let err = confusion(&[(k(1), 1)], &[(k(2), 1)]).unwrap_err();
        assert!(matches!(err, Error::KeyMismatch { examples } if examples.len() == 2));
    }

    #[test]
    fn never_predicting_down_scores_zero_f1_for_down() {
        // 3 down, 7 up, every prediction up.
        let cm = ConfusionMatrix { tp: 0, fp: 0, tn: 7, fn_: 3 };
        let m = metrics(&cm);
        assert_eq!(m.down.precision, None);
        assert_eq!(m.down.recall, Some(0.0));
        assert_eq!(m.down.f1, Some(0.0));
        let f1_up = 2.0 * 0.7 / 1.7;
        assert!((m.macro_f1.unwrap() - f1_up / 2.0).abs() < 1e-15);
        assert_eq!(m.macro_precision, Some(0.7));
    }
}
