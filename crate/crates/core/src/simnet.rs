//! Synthetic ATM network: Poisson failures, exponential transaction gaps and
//! a noisy status-file channel.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::calendar::{DayAssignment, SECONDS_PER_DAY};
use crate::math;
use crate::rng::{hash_str, Stream};
use crate::{Error, Result};

const TAG_OUTAGES: u64 = 0x6f75_7461;
const TAG_TRANSACTIONS: u64 = 0x7478_6e73;
const TAG_STATUS: u64 = 0x7374_6174;
const TAG_PROFILES: u64 = 0x7072_6f66;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtmProfile {
    pub atm_id: String,
    /// Mean gap between transactions while the ATM is up.
    pub mean_interarrival_s: f64,
    pub monthly_volume_class: f64,
    pub failure_rate_per_day: f64,
    pub mean_outage_s: f64,
}

impl AtmProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("atm {}: {what}", self.atm_id)));
        if !(self.mean_interarrival_s > 0.0) {
            return bad("mean_interarrival_s must be positive");
        }
        if !(self.mean_outage_s > 0.0) {
            return bad("mean_outage_s must be positive");
        }
        if !(self.failure_rate_per_day >= 0.0) || !self.failure_rate_per_day.is_finite() {
            return bad("failure_rate_per_day must be nonnegative");
        }
        if !(0.0..=1.0).contains(&self.monthly_volume_class) {
            return bad("monthly_volume_class must lie in [0,1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cause {
    CardReader,
    Keypad,
    Network,
}

impl Cause {
    pub const ALL: [Cause; 3] = [Cause::CardReader, Cause::Keypad, Cause::Network];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutageInterval {
    pub atm_id: String,
    pub start_s: i64,
    pub end_s: i64,
    pub cause: Cause,
}

impl OutageInterval {
    pub fn contains(&self, ts: i64) -> bool {
        self.start_s <= ts && ts < self.end_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatusNoiseModel {
    /// Probability that a truly-up snapshot reads down.
    pub p_false_alarm: f64,
    /// Probability that a truly-down snapshot reads up.
    pub p_missed_alarm: f64,
}

impl Default for StatusNoiseModel {
    fn default() -> Self {
        StatusNoiseModel {
            p_false_alarm: 0.0356,
            // recall(down) of 0.6165
            p_missed_alarm: 0.3835,
        }
    }
}

impl StatusNoiseModel {
    pub const NOISELESS: StatusNoiseModel = StatusNoiseModel {
        p_false_alarm: 0.0,
        p_missed_alarm: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_false_alarm", self.p_false_alarm),
            ("p_missed_alarm", self.p_missed_alarm),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name}={p} outside [0,1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_atms: usize,
    pub horizon_days: u32,
    pub snapshot_interval_s: i64,
    pub seed: u64,
    /// Epoch second at which the horizon starts.
    pub start_s: i64,
    /// Day-type overrides on top of the weekly pattern.
    pub calendar: Vec<DayAssignment>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_atms: 50,
            horizon_days: 30,
            snapshot_interval_s: 300,
            seed: 1,
            // 2024-01-01T00:00:00Z
            start_s: 1_704_067_200,
            calendar: Vec::new(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_atms == 0 {
            return Err(Error::InvalidConfig("n_atms must be at least 1".into()));
        }
        if self.horizon_days == 0 {
            return Err(Error::InvalidConfig("horizon_days must be at least 1".into()));
        }
        if self.snapshot_interval_s < 1 {
            return Err(Error::InvalidConfig(
                "snapshot_interval_s must be at least 1".into(),
            ));
        }
        if self.horizon_s() % self.snapshot_interval_s != 0 {
            return Err(Error::InvalidConfig(format!(
                "snapshot_interval_s={} does not divide the horizon of {} s",
                self.snapshot_interval_s,
                self.horizon_s()
            )));
        }
        Ok(())
    }

    pub fn horizon_s(&self) -> i64 {
        i64::from(self.horizon_days) * SECONDS_PER_DAY
    }

    pub fn end_s(&self) -> i64 {
        self.start_s + self.horizon_s()
    }

    pub fn snapshots_per_atm(&self) -> usize {
        (self.horizon_s() / self.snapshot_interval_s) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub atm_id: String,
    pub ts: i64,
    pub amount_class: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusSnapshot {
    pub atm_id: String,
    pub ts: i64,
    pub card_reader_ok: bool,
    pub keypad_ok: bool,
    pub network_ok: bool,
    pub reported_up: bool,
    /// Ground truth, kept for evaluation only.
    pub true_up: bool,
}

/// Draws failure starts from a homogeneous Poisson process and exponential
/// repair times, clips to the horizon and merges overlaps (earliest cause
/// wins).
pub fn generate_outages(profile: &AtmProfile, config: &SimConfig) -> Result<Vec<OutageInterval>> {
    config.validate()?;
    profile.validate()?;
    let mut out: Vec<OutageInterval> = Vec::new();
    if profile.failure_rate_per_day == 0.0 {
        return Ok(out);
    }
    let mut rng = Stream::new(config.seed, &[hash_str(&profile.atm_id), TAG_OUTAGES]);
    let mean_gap = SECONDS_PER_DAY as f64 / profile.failure_rate_per_day;
    let horizon = config.horizon_s() as f64;
    let mut t = 0.0;
    let mut raw = Vec::new();
    loop {
        t += rng.exponential(mean_gap);
        if t >= horizon {
            break;
        }
        let duration = math::ceil(rng.exponential(profile.mean_outage_s)).max(1.0);
        let cause = Cause::ALL[rng.below(3)];
        let start = config.start_s + math::floor(t) as i64;
        let end = (start + duration as i64).min(config.end_s());
        if start < end {
            raw.push((start, end, cause));
        }
    }
    for (start, end, cause) in raw {
        match out.last_mut() {
            Some(prev) if start <= prev.end_s => prev.end_s = prev.end_s.max(end),
            _ => out.push(OutageInterval {
                atm_id: profile.atm_id.clone(),
                start_s: start,
                end_s: end,
                cause,
            }),
        }
    }
    Ok(out)
}

/// Merges possibly overlapping intervals of one ATM; the earliest cause is
/// kept for each merged run.
pub fn merge_outages(mut intervals: Vec<OutageInterval>) -> Vec<OutageInterval> {
    intervals.sort_by_key(|a| (a.start_s, a.end_s));
    let mut out: Vec<OutageInterval> = Vec::with_capacity(intervals.len());
    for iv in intervals {
        match out.last_mut() {
            Some(prev) if iv.start_s <= prev.end_s => prev.end_s = prev.end_s.max(iv.end_s),
            _ => out.push(iv),
        }
    }
    out
}

/// Poisson transaction stream for one ATM. Arrivals that fall inside an
/// outage are discarded, which by memorylessness is the same as restarting
/// the process at each recovery. Arrivals sharing a whole second with the
/// previous one are dropped so timestamps stay strictly increasing.
pub fn generate_transactions(
    profile: &AtmProfile,
    outages: &[OutageInterval],
    config: &SimConfig,
) -> Result<Vec<TransactionRecord>> {
    config.validate()?;
    profile.validate()?;
    let mut rng = Stream::new(config.seed, &[hash_str(&profile.atm_id), TAG_TRANSACTIONS]);
    let horizon = config.horizon_s() as f64;
    let mut out = Vec::new();
    let mut t = 0.0;
    let mut next_outage = 0;
    let mut last_ts = i64::MIN;
    loop {
        t += rng.exponential(profile.mean_interarrival_s);
        if t >= horizon {
            break;
        }
        // Always draw the amount so the stream does not depend on outages.
        let amount_class = amount_class(rng.unit());
        let ts = config.start_s + math::floor(t) as i64;
        while next_outage < outages.len() && outages[next_outage].end_s <= ts {
            next_outage += 1;
        }
        if outages.get(next_outage).is_some_and(|o| o.contains(ts)) || ts <= last_ts {
            continue;
        }
        last_ts = ts;
        out.push(TransactionRecord {
            atm_id: profile.atm_id.clone(),
            ts,
            amount_class,
        });
    }
    Ok(out)
}

fn amount_class(u: f64) -> u8 {
    match u {
        u if u < 0.4 => 0,
        u if u < 0.7 => 1,
        u if u < 0.9 => 2,
        _ => 3,
    }
}

/// One snapshot per cadence tick. The reported state flips with the noise
/// model; a down report carries one failed component flag (the outage cause
/// when truly down, a random component on a false alarm).
pub fn generate_status_snapshots(
    atm_id: &str,
    outages: &[OutageInterval],
    noise: &StatusNoiseModel,
    config: &SimConfig,
) -> Result<Vec<StatusSnapshot>> {
    config.validate()?;
    noise.validate()?;
    let mut rng = Stream::new(config.seed, &[hash_str(atm_id), TAG_STATUS]);
    let n = config.snapshots_per_atm();
    let mut out = Vec::with_capacity(n);
    let mut idx = 0;
    for k in 0..n {
        let ts = config.start_s + k as i64 * config.snapshot_interval_s;
        while idx < outages.len() && outages[idx].end_s <= ts {
            idx += 1;
        }
        let active = outages.get(idx).filter(|o| o.contains(ts));
        let true_up = active.is_none();
        let flip = rng.unit();
        let random_cause = Cause::ALL[rng.below(3)];
        let reported_up = if true_up {
            flip >= noise.p_false_alarm
        } else {
            flip < noise.p_missed_alarm
        };
        let failed = if reported_up {
            None
        } else {
            Some(active.map_or(random_cause, |o| o.cause))
        };
        out.push(StatusSnapshot {
            atm_id: String::from(atm_id),
            ts,
            card_reader_ok: failed != Some(Cause::CardReader),
            keypad_ok: failed != Some(Cause::Keypad),
            network_ok: failed != Some(Cause::Network),
            reported_up,
            true_up,
        });
    }
    Ok(out)
}

/// How per-ATM profiles are drawn for a simulated network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSpec {
    /// Network-wide mean transaction gap.
    pub mean_interarrival_s: f64,
    /// Per-ATM mean gaps are drawn uniformly in `mean * [1 - spread, 1 + spread]`.
    pub interarrival_spread: f64,
    /// Target long-run fraction of time an ATM is down.
    pub down_prevalence: f64,
    pub mean_outage_s: f64,
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec {
            mean_interarrival_s: 271.0,
            interarrival_spread: 0.25,
            down_prevalence: 0.0085,
            mean_outage_s: 6.0 * 3600.0,
        }
    }
}

impl ProfileSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_interarrival_s > 0.0) || !(self.mean_outage_s > 0.0) {
            return Err(Error::InvalidConfig(
                "profile means must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.interarrival_spread) {
            return Err(Error::InvalidConfig(
                "interarrival_spread must lie in [0,1)".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.down_prevalence) {
            return Err(Error::InvalidConfig(
                "down_prevalence must lie in [0,1)".into(),
            ));
        }
        Ok(())
    }

    /// Failure rate whose Poisson-boolean down fraction `1 - exp(-rate * mean_outage)`
    /// equals the target prevalence.
    pub fn failure_rate_per_day(&self) -> f64 {
        let load = -math::ln(1.0 - self.down_prevalence);
        load * SECONDS_PER_DAY as f64 / self.mean_outage_s
    }
}

pub fn atm_id(index: usize) -> String {
    format!("ATM-{:04}", index + 1)
}

/// Draws `config.n_atms` profiles. The volume class is the mid-rank of each
/// ATM's expected traffic.
pub fn draw_profiles(config: &SimConfig, spec: &ProfileSpec) -> Result<Vec<AtmProfile>> {
    config.validate()?;
    spec.validate()?;
    let mut rng = Stream::new(config.seed, &[TAG_PROFILES]);
    let gaps: Vec<f64> = (0..config.n_atms)
        .map(|_| spec.mean_interarrival_s * (1.0 + spec.interarrival_spread * (2.0 * rng.unit() - 1.0)))
        .collect();
    let n = gaps.len() as f64;
    let rate = spec.failure_rate_per_day();
    Ok(gaps
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let busier = gaps.iter().filter(|&&o| o > g).count() as f64;
            let ties = gaps.iter().filter(|&&o| o == g).count() as f64;
            AtmProfile {
                atm_id: atm_id(i),
                mean_interarrival_s: g,
                monthly_volume_class: (busier + 0.5 * ties) / n,
                failure_rate_per_day: rate,
                mean_outage_s: spec.mean_outage_s,
            }
        })
        .collect())
}

/// Everything the simulator produces for a network.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub config: SimConfig,
    pub profiles: Vec<AtmProfile>,
    pub outages: Vec<OutageInterval>,
    pub transactions: Vec<TransactionRecord>,
    pub snapshots: Vec<StatusSnapshot>,
}

impl World {
    pub fn outages_of<'a>(&'a self, atm_id: &'a str) -> impl Iterator<Item = &'a OutageInterval> + 'a {
        self.outages.iter().filter(move |o| o.atm_id == atm_id)
    }
}

/// Runs the three generators for every profile. Each ATM draws from its own
/// streams, so the result does not depend on generation order.
pub fn simulate(
    config: &SimConfig,
    profiles: &[AtmProfile],
    noise: &StatusNoiseModel,
) -> Result<World> {
    config.validate()?;
    noise.validate()?;
    let mut outages = Vec::new();
    let mut transactions = Vec::new();
    let mut snapshots = Vec::new();
    for profile in profiles {
        let o = generate_outages(profile, config)?;
        transactions.extend(generate_transactions(profile, &o, config)?);
        snapshots.extend(generate_status_snapshots(&profile.atm_id, &o, noise, config)?);
        outages.extend(o);
    }
    Ok(World {
        config: config.clone(),
        profiles: profiles.to_vec(),
        outages,
        transactions,
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn profile(rate: f64) -> AtmProfile {
        AtmProfile {
            atm_id: "ATM-0001".into(),
            mean_interarrival_s: 271.0,
            monthly_volume_class: 0.5,
            failure_rate_per_day: rate,
            mean_outage_s: 3600.0,
        }
    }

    fn config(days: u32, seed: u64) -> SimConfig {
        SimConfig {
            n_atms: 1,
            horizon_days: days,
            seed,
            ..SimConfig::default()
        }
    }

    #[test]
    fn zero_rate_means_no_outages() {
        assert!(generate_outages(&profile(0.0), &config(30, 1)).unwrap().is_empty());
    }

    #[test]
    fn rejects_zero_horizon() {
        assert!(generate_outages(&profile(0.1), &config(0, 1)).is_err());
        let bad = SimConfig {
            snapshot_interval_s: 7,
            ..config(1, 1)
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn outage_count_tracks_rate() {
        // 100 days at 0.1/day: expected 10 starts. Short outages make merging rare.
        let p = AtmProfile {
            mean_outage_s: 60.0,
            ..profile(0.1)
        };
        let total: usize = (0..200)
            .map(|seed| generate_outages(&p, &config(100, seed)).unwrap().len())
            .sum();
        let mean = total as f64 / 200.0;
        assert!((8.0..=12.0).contains(&mean), "{mean}");
    }

    #[test]
    fn overlapping_intervals_merge() {
        let iv = |s, e, cause| OutageInterval {
            atm_id: "a".into(),
            start_s: s,
            end_s: e,
            cause,
        };
        let merged = merge_outages(vec![iv(50, 150, Cause::Network), iv(0, 100, Cause::Keypad)]);
        assert_eq!(merged, vec![iv(0, 150, Cause::Keypad)]);
    }

    #[test]
    fn outages_are_sorted_disjoint_and_clipped() {
        let cfg = config(60, 4);
        let p = AtmProfile {
            mean_outage_s: 3.0 * 86_400.0,
            ..profile(0.5)
        };
        let o = generate_outages(&p, &cfg).unwrap();
        assert!(!o.is_empty());
        for w in o.windows(2) {
            assert!(w[0].end_s < w[1].start_s);
        }
        for iv in &o {
            assert!(iv.start_s < iv.end_s);
            assert!(iv.start_s >= cfg.start_s && iv.end_s <= cfg.end_s());
        }
    }

    #[test]
    fn fully_down_atm_has_no_transactions() {
        let cfg = config(1, 1);
        let o = vec![OutageInterval {
            atm_id: "ATM-0001".into(),
            start_s: cfg.start_s,
            end_s: cfg.end_s(),
            cause: Cause::Network,
        }];
        assert!(generate_transactions(&profile(0.0), &o, &cfg).unwrap().is_empty());
    }

    #[test]
    fn transaction_count_tracks_mean_gap() {
        // 27 100 s of up-time at a 271 s mean gap: about 100 transactions.
        let total: usize = (0..200)
            .map(|seed| {
                let cfg = config(1, seed);
                let o = vec![OutageInterval {
                    atm_id: "ATM-0001".into(),
                    start_s: cfg.start_s + 27_100,
                    end_s: cfg.end_s(),
                    cause: Cause::Keypad,
                }];
                generate_transactions(&profile(0.0), &o, &cfg).unwrap().len()
            })
            .sum();
        let mean = total as f64 / 200.0;
        assert!((90.0..=110.0).contains(&mean), "{mean}");
    }

    #[test]
    fn transactions_avoid_outages_and_increase() {
        let cfg = config(20, 9);
        let p = AtmProfile {
            mean_outage_s: 20_000.0,
            ..profile(0.4)
        };
        let o = generate_outages(&p, &cfg).unwrap();
        let tx = generate_transactions(&p, &o, &cfg).unwrap();
        for w in tx.windows(2) {
            assert!(w[0].ts < w[1].ts);
        }
        for t in &tx {
            assert!(!o.iter().any(|iv| iv.contains(t.ts)));
        }
    }

    #[test]
    fn noiseless_channel_reports_truth() {
        let cfg = config(10, 2);
        let p = AtmProfile {
            mean_outage_s: 20_000.0,
            ..profile(0.5)
        };
        let o = generate_outages(&p, &cfg).unwrap();
        let snaps = generate_status_snapshots(&p.atm_id, &o, &StatusNoiseModel::NOISELESS, &cfg).unwrap();
        assert_eq!(snaps.len(), 10 * 288);
        assert!(snaps.iter().any(|s| !s.true_up));
        for s in &snaps {
            assert_eq!(s.reported_up, s.true_up);
            let all_ok = s.card_reader_ok && s.keypad_ok && s.network_ok;
            assert_eq!(all_ok, s.reported_up);
        }
    }

    #[test]
    fn one_day_at_300s_gives_288_snapshots() {
        let cfg = config(1, 1);
        let snaps = generate_status_snapshots("x", &[], &StatusNoiseModel::default(), &cfg).unwrap();
        assert_eq!(snaps.len(), 288);
    }

    #[test]
    fn default_profile_rate_hits_prevalence() {
        let spec = ProfileSpec::default();
        let load = spec.failure_rate_per_day() * spec.mean_outage_s / 86_400.0;
        assert!((1.0 - math::exp(-load) - 0.0085).abs() < 1e-12);
    }
}
