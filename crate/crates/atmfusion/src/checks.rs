//! Single-run checks of a pipeline outcome against the calibration targets
//! and the expected orderings. `pipeline --check` runs these.

use crate::experiment::Outcome;

/// Raw status channel targets: (accuracy, precision(down), recall(down)).
pub const STATUS_ACCURACY: (f64, f64) = (0.9614, 0.005);
pub const STATUS_PRECISION_DOWN: (f64, f64) = (0.1275, 0.02);
pub const STATUS_RECALL_DOWN: (f64, f64) = (0.6165, 0.02);
/// Gap detector false-flag rate on up instances.
pub const TX_FALSE_FLAG: (f64, f64) = (0.01, 0.005);
/// Stacked false-alarm rate must fall below this share of the raw channel's.
pub const FALSE_ALARM_SHARE: f64 = 0.5;
pub const ENSEMBLE_MARGIN: f64 = 0.02;
pub const STACKING_SLACK: f64 = 0.005;
pub const ENSEMBLES: [&str; 5] = ["rf", "bagging", "dcs_la", "des_knora_e", "stacking"];
pub const STACK_BASES: [&str; 3] = ["rf", "lgbm", "cat"];

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

fn within(v: Option<f64>, (target, tol): (f64, f64)) -> bool {
    v.is_some_and(|v| (v - target).abs() <= tol)
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |v| format!("{v:.4}"))
}

pub fn run_checks(o: &Outcome) -> Vec<Check> {
    let mut out = Vec::new();
    if let Some(s) = o.baseline("status_file", "all") {
        let m = &s.metrics;
        out.push(Check {
            name: "status_channel_calibration",
            pass: within(m.accuracy, STATUS_ACCURACY)
                && within(m.down.precision, STATUS_PRECISION_DOWN)
                && within(m.down.recall, STATUS_RECALL_DOWN),
            detail: format!(
                "accuracy {} precision(down) {} recall(down) {}",
                show(m.accuracy),
                show(m.down.precision),
                show(m.down.recall)
            ),
        });
    }
    if let Some(s) = o.baseline("tx_status", "all") {
        out.push(Check {
            name: "gap_detector_false_flags",
            pass: within(s.false_alarm_rate, TX_FALSE_FLAG),
            detail: format!("false-flag rate {}", show(s.false_alarm_rate)),
        });
    }
    for name in ["svm", "rf", "lgbm"] {
        if let (Some(b), Some(a)) = (o.ablation(name, "before"), o.ablation(name, "after")) {
            out.push(Check {
                name: match name {
                    "svm" => "smote_raises_svm_recall",
                    "rf" => "smote_raises_rf_recall",
                    _ => "smote_raises_lgbm_recall",
                },
                pass: a.recall_down() > b.recall_down(),
                detail: format!(
                    "recall(down) {:.4} -> {:.4}",
                    b.recall_down(),
                    a.recall_down()
                ),
            });
        }
    }
    if let (Some(raw), Some(st)) = (o.baseline("status_file", "test"), o.model("stacking")) {
        let (r, s) = (
            raw.false_alarm_rate.unwrap_or(f64::NAN),
            st.false_alarm_rate.unwrap_or(f64::NAN),
        );
        out.push(Check {
            name: "false_alarm_reduction",
            pass: s < FALSE_ALARM_SHARE * r,
            detail: format!("stacking {s:.5} vs raw channel {r:.5}"),
        });
    }
    if let Some(svm) = o.model("svm") {
        let worst = ENSEMBLES
            .iter()
            .filter_map(|n| o.model(n))
            .map(|s| (s.name.clone(), s.macro_f1() - svm.macro_f1()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((name, gap)) = worst {
            out.push(Check {
                name: "ensembles_beat_svm",
                pass: gap >= ENSEMBLE_MARGIN,
                detail: format!("smallest macro-F1 margin {gap:.4} ({name})"),
            });
        }
    }
    if let Some(st) = o.model("stacking") {
        let best = STACK_BASES
            .iter()
            .filter_map(|n| o.model(n))
            .map(|s| s.macro_f1())
            .fold(f64::NEG_INFINITY, f64::max);
        out.push(Check {
            name: "stacking_matches_bases",
            pass: st.macro_f1() >= best - STACKING_SLACK,
            detail: format!("stacking {:.4} vs best base {best:.4}", st.macro_f1()),
        });
    }
    out
}
