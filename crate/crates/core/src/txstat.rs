//! Inter-arrival statistics and the transaction-gap detector.
//!
//! Transactions at a healthy ATM form a Poisson process, so gaps are
//! exponential with mean `mu`. The detector flags an ATM as suspected down
//! once the silence since its last transaction exceeds the 99th percentile of
//! that exponential, `mu * ln(100)`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::journal::StatusTimeline;
use crate::math::{self, exp, ln, sqrt};
use crate::simnet::TransactionRecord;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Exponential,
    Gamma,
    Logistic,
    Normal,
}

impl Family {
    /// Also the tie-break order when ranking.
    pub const ALL: [Family; 4] = [
        Family::Exponential,
        Family::Gamma,
        Family::Logistic,
        Family::Normal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Exponential => "exponential",
            Family::Gamma => "gamma",
            Family::Logistic => "logistic",
            Family::Normal => "normal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FittedDistribution {
    Exponential { mean: f64 },
    Gamma { shape: f64, scale: f64 },
    Logistic { location: f64, scale: f64 },
    Normal { mean: f64, sd: f64 },
}

impl FittedDistribution {
    pub fn family(&self) -> Family {
        match self {
            FittedDistribution::Exponential { .. } => Family::Exponential,
            FittedDistribution::Gamma { .. } => Family::Gamma,
            FittedDistribution::Logistic { .. } => Family::Logistic,
            FittedDistribution::Normal { .. } => Family::Normal,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            FittedDistribution::Exponential { mean } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -libm::expm1(-x / mean)
                }
            }
            FittedDistribution::Gamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    regularized_gamma_p(shape, x / scale)
                }
            }
            FittedDistribution::Logistic { location, scale } => {
                math::sigmoid((x - location) / scale)
            }
            FittedDistribution::Normal { mean, sd } => {
                0.5 * libm::erfc(-(x - mean) / (sd * core::f64::consts::SQRT_2))
            }
        }
    }
}

/// Regularized lower incomplete gamma `P(a, x)`: series below `a + 1`,
/// Lentz continued fraction above.
pub fn regularized_gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let log_prefix = a * ln(x) - x - libm::lgamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        (sum * exp(log_prefix)).clamp(0.0, 1.0)
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (1.0 - exp(log_prefix) * h).clamp(0.0, 1.0)
    }
}

/// Fits one family. Exponential by maximum likelihood, normal by sample
/// mean and sd, logistic by matching the sd (`scale = sd * sqrt(3) / pi`),
/// gamma by the method of moments.
pub fn fit(family: Family, samples: &[f64]) -> Result<FittedDistribution> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Fit {
            family: family.name(),
            reason: "non-finite sample".into(),
        });
    }
    let needs_positive = matches!(family, Family::Exponential | Family::Gamma);
    if needs_positive && samples.iter().any(|&x| x <= 0.0) {
        return Err(Error::Fit {
            family: family.name(),
            reason: "samples must be positive".into(),
        });
    }
    let mean = math::mean(samples);
    if family == Family::Exponential {
        return Ok(FittedDistribution::Exponential { mean });
    }
    let var = math::sample_variance(samples);
    if !(var > 0.0) {
        return Err(Error::DegenerateFit(family.name()));
    }
    let sd = sqrt(var);
    Ok(match family {
        Family::Gamma => FittedDistribution::Gamma {
            shape: mean * mean / var,
            scale: var / mean,
        },
        Family::Logistic => FittedDistribution::Logistic {
            location: mean,
            scale: sd * sqrt(3.0) / PI,
        },
        Family::Normal => FittedDistribution::Normal { mean, sd },
        Family::Exponential => unreachable!(),
    })
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `samples` and
/// `dist`, taking both one-sided gaps at every sample point.
pub fn ks_statistic(samples: &[f64], dist: &FittedDistribution) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = dist.cdf(x);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0f64, f64::max);
    Ok(d.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyRanking {
    /// Ascending by D, ties in [`Family::ALL`] order.
    pub ranked: Vec<(Family, f64)>,
    /// Families that could not be fitted.
    pub skipped: Vec<(Family, Error)>,
}

pub const MIN_RANK_SAMPLES: usize = 8;

pub fn rank_families(samples: &[f64]) -> Result<FamilyRanking> {
    if samples.len() < MIN_RANK_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_RANK_SAMPLES,
            got: samples.len(),
        });
    }
    let mut ranked = Vec::new();
    let mut skipped = Vec::new();
    for family in Family::ALL {
        match fit(family, samples).and_then(|d| ks_statistic(samples, &d)) {
            Ok(d) => ranked.push((family, d)),
            Err(e) => skipped.push((family, e)),
        }
    }
    // Stable sort keeps the family order on exact ties.
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(FamilyRanking { ranked, skipped })
}

/// Exponential quantile: silence longer than this is unlikely at the given
/// confidence.
pub fn gap_threshold(mean_interarrival_s: f64, confidence: f64) -> Result<f64> {
    if !(mean_interarrival_s > 0.0) || !mean_interarrival_s.is_finite() {
        return Err(Error::Domain(format!(
            "mean inter-arrival must be positive, got {mean_interarrival_s}"
        )));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Domain(format!(
            "confidence must lie in (0,1), got {confidence}"
        )));
    }
    Ok(-mean_interarrival_s * libm::log1p(-confidence))
}

pub const DEFAULT_CONFIDENCE: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapFit {
    pub mean_interarrival_s: f64,
    pub threshold_s: f64,
    pub n_gaps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapDetectorState {
    pub atm_id: String,
    pub last_tx_ts: i64,
    /// `None` flags an ATM with too little clean traffic to fit; such an ATM
    /// is always reported up.
    pub fit: Option<GapFit>,
}

impl GapDetectorState {
    pub fn fitted(atm_id: &str, mean_interarrival_s: f64, last_tx_ts: i64) -> Result<Self> {
        Ok(GapDetectorState {
            atm_id: String::from(atm_id),
            last_tx_ts,
            fit: Some(GapFit {
                mean_interarrival_s,
                threshold_s: gap_threshold(mean_interarrival_s, DEFAULT_CONFIDENCE)?,
                n_gaps: 0,
            }),
        })
    }

    pub fn is_fitted(&self) -> bool {
        self.fit.is_some()
    }

    /// New state after a transaction at `ts`.
    #[must_use]
    pub fn observe(&self, ts: i64) -> Self {
        GapDetectorState {
            last_tx_ts: self.last_tx_ts.max(ts),
            ..self.clone()
        }
    }
}

/// `false` (suspected down) iff the silence since the last transaction
/// strictly exceeds the threshold.
pub fn transaction_status(state: &GapDetectorState, now: i64) -> Result<bool> {
    if now < state.last_tx_ts {
        return Err(Error::Domain(format!(
            "now={now} precedes last transaction at {}",
            state.last_tx_ts
        )));
    }
    Ok(match state.fit {
        Some(fit) => ((now - state.last_tx_ts) as f64) <= fit.threshold_s,
        None => true,
    })
}

/// Gaps between consecutive transactions of one ATM whose closed span lies
/// inside `window` and touches no down interval.
pub fn clean_gaps(
    transactions: &[&TransactionRecord],
    truth: &StatusTimeline,
    window: (i64, i64),
) -> Vec<f64> {
    let downs: Vec<(i64, i64)> = truth.down_spans().map(|s| (s.start_s, s.end_s)).collect();
    let mut gaps = Vec::new();
    let mut d = 0;
    for pair in transactions.windows(2) {
        let (a, b) = (pair[0].ts, pair[1].ts);
        if a < window.0 || b >= window.1 {
            continue;
        }
        while d < downs.len() && downs[d].1 <= a {
            d += 1;
        }
        let touches_down = downs.get(d).is_some_and(|&(s, _)| s <= b);
        if !touches_down {
            gaps.push((b - a) as f64);
        }
    }
    gaps
}

/// Fits a detector per ATM on the clean gaps inside `window`. One state is
/// returned per truth timeline, in timeline order.
pub fn fit_per_atm(
    transactions: &[TransactionRecord],
    truth: &[StatusTimeline],
    window: (i64, i64),
) -> Result<Vec<GapDetectorState>> {
    fit_per_atm_at(transactions, truth, window, DEFAULT_CONFIDENCE)
}

/// [`fit_per_atm`] with an explicit threshold confidence.
pub fn fit_per_atm_at(
    transactions: &[TransactionRecord],
    truth: &[StatusTimeline],
    window: (i64, i64),
    confidence: f64,
) -> Result<Vec<GapDetectorState>> {
    let mut by_atm: BTreeMap<&str, Vec<&TransactionRecord>> = BTreeMap::new();
    for t in transactions {
        by_atm.entry(t.atm_id.as_str()).or_default().push(t);
    }
    let empty = Vec::new();
    truth
        .iter()
        .map(|timeline| {
            let mut txs = by_atm.get(timeline.atm_id.as_str()).unwrap_or(&empty).clone();
            txs.sort_by_key(|t| t.ts);
            let gaps = clean_gaps(&txs, timeline, window);
            let last_tx_ts = txs
                .iter()
                .map(|t| t.ts)
                .filter(|&ts| ts >= window.0 && ts < window.1)
                .max()
                .unwrap_or(window.0);
            let fit = if gaps.is_empty() {
                None
            } else {
                let mean = math::mean(&gaps);
                Some(GapFit {
                    mean_interarrival_s: mean,
                    threshold_s: gap_threshold(mean, confidence)?,
                    n_gaps: gaps.len(),
                })
            };
            Ok(GapDetectorState {
                atm_id: timeline.atm_id.clone(),
                last_tx_ts,
                fit,
            })
        })
        .collect()
}

/// Evaluates the detector at each of `times` (ascending) while replaying the
/// ATM's transactions (ascending). The replay starts with the last
/// transaction assumed at `origin`.
pub fn replay_status(
    state: &GapDetectorState,
    tx_times: &[i64],
    times: &[i64],
    origin: i64,
) -> Result<Vec<bool>> {
    let mut current = GapDetectorState {
        last_tx_ts: origin,
        ..state.clone()
    };
    let mut next = 0;
    let mut out = Vec::with_capacity(times.len());
    for &now in times {
        while next < tx_times.len() && tx_times[next] <= now {
            current = current.observe(tx_times[next]);
            next += 1;
        }
        out.push(transaction_status(&current, now)?);
    }
    Ok(out)
}

pub fn describe_ranking(r: &FamilyRanking) -> String {
    let mut s = String::from("family,ks_d\n");
    for (f, d) in &r.ranked {
        s.push_str(&format!("{},{}\n", f.name(), d));
    }
    s
}
