//! Monte Carlo checks of the KS family ranking on simulated traffic.

use atmfusion_core::rng::Stream;
use atmfusion_core::simnet::{generate_transactions, AtmProfile, SimConfig};
use atmfusion_core::txstat::{fit, ks_statistic, rank_families, Family, FittedDistribution};

/// Gaps of one healthy ATM over the default world's training window
/// (21 of 30 days, about 6 700 gaps), the sample each KS row is built from.
fn window_of_gaps(seed: u64) -> Vec<f64> {
    let cfg = SimConfig {
        n_atms: 1,
        horizon_days: 21,
        seed,
        ..SimConfig::default()
    };
    let profile = AtmProfile {
        atm_id: "atm".into(),
        mean_interarrival_s: 271.0,
        monthly_volume_class: 0.5,
        failure_rate_per_day: 0.0,
        mean_outage_s: 3600.0,
    };
    let txs = generate_transactions(&profile, &[], &cfg).unwrap();
    txs.windows(2).map(|w| (w[1].ts - w[0].ts) as f64).filter(|g| *g > 0.0).collect()
}

#[test]
fn exponential_wins_and_normal_loses_on_simulated_gaps() {
    let (mut exp_ok, mut normal_last) = (0, 0);
    for seed in 1..=100 {
        let gaps = window_of_gaps(seed);
        assert!(gaps.len() > 6000);
        let r = rank_families(&gaps).unwrap();
        assert!(r.skipped.is_empty());
        let d = |f: Family| r.ranked.iter().find(|(g, _)| *g == f).unwrap().1;
        let best = r.ranked[0].1;
        if d(Family::Exponential) <= best || d(Family::Exponential) <= d(Family::Gamma) + 0.01 {
            exp_ok += 1;
        }
        if r.ranked.last().unwrap().0 == Family::Normal {
            normal_last += 1;
        }
    }
    assert!(exp_ok >= 95, "exponential best or near gamma in {exp_ok}/100");
    assert!(normal_last >= 90, "normal last in {normal_last}/100");
}

#[test]
fn own_cdf_samples_give_small_d() {
    let mut small = 0;
    for seed in 0..100 {
        let mut rng = Stream::new(seed, &[0x6b73]);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.exponential(271.0)).collect();
        let d = ks_statistic(&xs, &FittedDistribution::Exponential { mean: 271.0 }).unwrap();
        if d < 0.02 {
            small += 1;
        }
    }
    assert!(small >= 95, "{small}/100");
}

#[test]
fn gamma_fit_of_exponential_data_has_unit_shape() {
    let mut rng = Stream::new(5, &[]);
    let xs: Vec<f64> = (0..10_000).map(|_| rng.exponential(271.0)).collect();
    match fit(Family::Gamma, &xs).unwrap() {
        FittedDistribution::Gamma { shape, .. } => assert!((0.9..=1.1).contains(&shape), "{shape}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn shifted_normal_data_prefers_normal_over_exponential() {
    let mut rng = Stream::new(6, &[]);
    let xs: Vec<f64> = (0..2000)
        .map(|_| {
            // Box-Muller
            let (u, v) = (rng.unit().max(1e-300), rng.unit());
            1000.0 + 50.0 * (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
        })
        .collect();
    let r = rank_families(&xs).unwrap();
    let pos = |f: Family| r.ranked.iter().position(|(g, _)| *g == f).unwrap();
    assert!(pos(Family::Normal) < pos(Family::Exponential));
}
