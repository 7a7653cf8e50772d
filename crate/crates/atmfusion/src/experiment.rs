//! End-to-end pipeline: simulate, label, fit gap detectors, build features,
//! split, oversample, train, fuse and evaluate.

use std::collections::BTreeMap;

use atmfusion_core::balance::smote;
use atmfusion_core::calendar::Calendar;
use atmfusion_core::eval::{
    false_alarm_rate, fleet_kpis, kpis, metrics, missed_alarm_rate, ConfusionMatrix, KpiReport,
    MetricsReport,
};
use atmfusion_core::features::{
    build_dataset, correlation_matrix, split_train_test, CorrelationMatrix, DatasetInputs,
    LabeledInstance, STATUS_FILE, TX_STATUS,
};
use atmfusion_core::fusion::{
    assemble_stacking, build_dsel, dcs_la_predict, knora_e_predict, split_dsel,
    stratified_folds, Dsel, PoolSpec, StackModel, StackingParams,
};
use atmfusion_core::journal::{extract_all, journal_from_world, JournalEvent, StatusTimeline};
use atmfusion_core::learners::{
    train_bagging, train_model, BaggingParams, Classifier, ModelKind, Samples, TrainedModel,
};
use atmfusion_core::simnet::{draw_profiles, simulate, World};
use atmfusion_core::txstat::{clean_gaps, fit_per_atm_at, rank_families, Family, GapDetectorState};
use atmfusion_core::{Error, DOWN, UP};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
#[error("stage {stage} failed: {source}")]
pub struct PipelineError {
    pub stage: &'static str,
    #[source]
    pub source: Error,
}

type Result<T> = std::result::Result<T, PipelineError>;

fn at<T>(stage: &'static str, r: atmfusion_core::Result<T>) -> Result<T> {
    r.map_err(|source| PipelineError { stage, source })
}

/// One classifier (or raw channel) scored on one evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scored {
    pub name: String,
    pub scope: String,
    pub cm: ConfusionMatrix,
    pub metrics: MetricsReport,
    pub false_alarm_rate: Option<f64>,
    pub missed_alarm_rate: Option<f64>,
}

impl Scored {
    pub fn new(name: &str, scope: &str, cm: ConfusionMatrix) -> Self {
        Scored {
            name: name.to_string(),
            scope: scope.to_string(),
            metrics: metrics(&cm),
            false_alarm_rate: false_alarm_rate(&cm),
            missed_alarm_rate: missed_alarm_rate(&cm),
            cm,
        }
    }

    pub fn macro_f1(&self) -> f64 {
        self.metrics.macro_f1.unwrap_or(f64::NAN)
    }

    pub fn recall_down(&self) -> f64 {
        self.metrics.down.recall.unwrap_or(f64::NAN)
    }
}

/// KS statistics of one family across ATMs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsRow {
    pub family: &'static str,
    pub n_atms: usize,
    pub mean_d: Option<f64>,
    pub min_d: Option<f64>,
    pub max_d: Option<f64>,
    /// ATMs on which this family had the smallest D.
    pub best_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub n_atms: usize,
    pub n_outages: usize,
    pub n_instances: usize,
    pub n_down: usize,
    pub n_train: usize,
    pub n_train_down: usize,
    pub n_test: usize,
    pub n_test_down: usize,
    pub n_balanced: usize,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub config: ExperimentConfig,
    pub summary: Summary,
    pub ks: Vec<KsRow>,
    /// Raw status file and transaction status used directly as classifiers.
    pub baselines: Vec<Scored>,
    /// Scope `before` / `after` oversampling.
    pub ablation: Vec<Scored>,
    pub models: Vec<Scored>,
    pub correlation: CorrelationMatrix,
    /// Per ATM, then the pooled fleet row under `fleet`.
    pub kpis: Vec<(String, KpiReport)>,
}

impl Outcome {
    pub fn model(&self, name: &str) -> Option<&Scored> {
        self.models.iter().find(|s| s.name == name)
    }

    pub fn baseline(&self, name: &str, scope: &str) -> Option<&Scored> {
        self.baselines
            .iter()
            .find(|s| s.name == name && s.scope == scope)
    }

    pub fn ablation(&self, name: &str, scope: &str) -> Option<&Scored> {
        self.ablation
            .iter()
            .find(|s| s.name == name && s.scope == scope)
    }
}

/// Simulated world plus the journal synthesized from it.
pub fn simulate_world(cfg: &ExperimentConfig) -> Result<(World, Vec<JournalEvent>)> {
    let profiles = at("simulate", draw_profiles(&cfg.sim, &cfg.profile))?;
    let world = at("simulate", simulate(&cfg.sim, &profiles, &cfg.noise))?;
    let journal = journal_from_world(&world.outages, &world.transactions);
    Ok((world, journal))
}

/// Start of the horizon up to the chronological train cut.
pub fn train_window(cfg: &ExperimentConfig) -> (i64, i64) {
    let start = cfg.sim.start_s;
    let cut = start + (cfg.split.train_ratio * cfg.sim.horizon_s() as f64) as i64;
    (start, cut)
}

pub fn calendar(cfg: &ExperimentConfig) -> Calendar {
    Calendar::covering(cfg.sim.start_s, cfg.sim.end_s(), &cfg.sim.calendar)
}

pub fn ks_table(world: &World, truth: &[StatusTimeline], window: (i64, i64)) -> Vec<KsRow> {
    let mut by_atm: BTreeMap<&str, Vec<_>> = BTreeMap::new();
    for t in &world.transactions {
        by_atm.entry(t.atm_id.as_str()).or_default().push(t);
    }
    let mut ds: BTreeMap<Family, Vec<f64>> = BTreeMap::new();
    let mut best: BTreeMap<Family, usize> = BTreeMap::new();
    for timeline in truth {
        let mut txs = by_atm.remove(timeline.atm_id.as_str()).unwrap_or_default();
        txs.sort_by_key(|t| t.ts);
        let gaps = clean_gaps(&txs, timeline, window);
        let Ok(ranking) = rank_families(&gaps) else {
            continue;
        };
        if let Some((f, _)) = ranking.ranked.first() {
            *best.entry(*f).or_default() += 1;
        }
        for (f, d) in ranking.ranked {
            ds.entry(f).or_default().push(d);
        }
    }
    Family::ALL
        .iter()
        .map(|f| {
            let v = ds.get(f).map(Vec::as_slice).unwrap_or(&[]);
            let n = v.len();
            KsRow {
                family: f.name(),
                n_atms: n,
                mean_d: (n > 0).then(|| v.iter().sum::<f64>() / n as f64),
                min_d: v.iter().copied().reduce(f64::min),
                max_d: v.iter().copied().reduce(f64::max),
                best_count: best.get(f).copied().unwrap_or(0),
            }
        })
        .collect()
}

fn feature_as_classifier(rows: &[LabeledInstance], feature: usize) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::default();
    for r in rows {
        cm.add(if r.x[feature] >= 0.5 { UP } else { DOWN }, r.y);
    }
    cm
}

fn score_labels(name: &str, scope: &str, predicted: &[u8], rows: &[LabeledInstance]) -> Scored {
    let mut cm = ConfusionMatrix::default();
    for (p, r) in predicted.iter().zip(rows) {
        cm.add(*p, r.y);
    }
    Scored::new(name, scope, cm)
}

fn predict_all(model: &(dyn Classifier + Sync), rows: &[LabeledInstance]) -> Vec<u8> {
    rows.par_iter().map(|r| model.label(&r.x)).collect()
}

fn predict_fused(
    rows: &[LabeledInstance],
    pool: &PoolSpec,
    dsel: &Dsel,
    rule: fn(&PoolSpec, &Dsel, &[f64]) -> atmfusion_core::Result<atmfusion_core::fusion::Decision>,
) -> Result<Vec<u8>> {
    rows.par_iter()
        .map(|r| at("fuse", rule(pool, dsel, &r.x).map(|d| d.label)))
        .collect()
}

enum Job {
    Balanced(ModelKind),
    Raw(ModelKind),
    Fold(usize, ModelKind),
    DcsMember(ModelKind),
    DesBag,
}

enum Trained {
    Model(TrainedModel),
    Fold(Vec<(usize, f64)>),
}

/// Runs every stage. Independent training jobs run on the current rayon
/// pool; results are merged in a fixed order, so output does not depend on
/// the thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate().map_err(|e| PipelineError {
        stage: "config",
        source: Error::InvalidConfig(e.to_string()),
    })?;
    let (world, journal) = simulate_world(cfg)?;
    let ids: Vec<String> = world.profiles.iter().map(|p| p.atm_id.clone()).collect();
    let horizon = (cfg.sim.start_s, cfg.sim.end_s());
    let truth = at("label", extract_all(&journal, &ids, horizon))?;

    let window = train_window(cfg);
    let states: Vec<GapDetectorState> = at(
        "txstat",
        fit_per_atm_at(&world.transactions, &truth, window, cfg.txstat.confidence),
    )?;
    let ks = ks_table(&world, &truth, window);

    let cal = calendar(cfg);
    let dataset = at(
        "features",
        build_dataset(&DatasetInputs {
            snapshots: &world.snapshots,
            transactions: &world.transactions,
            gap_states: &states,
            truth: &truth,
            calendar: &cal,
            policy: cfg.txstat.unfittable,
        }),
    )?;
    let correlation = at("features", correlation_matrix(&dataset))?;

    let (train, test) = at("split", split_train_test(&dataset, cfg.split.train_ratio))?;
    let mut baselines = Vec::new();
    for (name, f) in [("status_file", STATUS_FILE), ("tx_status", TX_STATUS)] {
        baselines.push(Scored::new(name, "all", feature_as_classifier(&dataset, f)));
        baselines.push(Scored::new(name, "test", feature_as_classifier(&test, f)));
    }

    let balanced = at("smote", smote(&train, &cfg.smote))?;
    let (dsel_fit, dsel_rows) = at(
        "fuse",
        split_dsel(&train, cfg.fusion.dsel_fraction, cfg.fusion.dsel_seed),
    )?;
    let dsel_balanced = at("smote", smote(&dsel_fit, &cfg.smote))?;

    let raw_samples = at("train", Samples::from_instances(&train))?;
    let bal_samples = at("train", Samples::from_instances(&balanced.instances))?;
    let dsel_samples = at("train", Samples::from_instances(&dsel_balanced.instances))?;

    let stack = StackingParams {
        bases: vec![ModelKind::Rf, ModelKind::Lgbm, ModelKind::Cat],
        folds: cfg.fusion.stacking_folds,
        seed: cfg.fusion.stacking_seed,
        models: cfg.models.clone(),
    };
    let plan = at(
        "train",
        stratified_folds(bal_samples.labels(), stack.folds, stack.seed),
    )?;
    let fold_fits: Vec<Samples> = (0..plan.folds)
        .map(|f| {
            let kept: Vec<usize> = (0..bal_samples.len())
                .filter(|&i| plan.assignment[i] as usize != f)
                .collect();
            bal_samples.subset(&kept)
        })
        .collect();

    let table8 = [
        ModelKind::Svm,
        ModelKind::Tree,
        ModelKind::Bagging,
        ModelKind::Lgbm,
        ModelKind::Cat,
        ModelKind::Rf,
    ];
    let ablated = [ModelKind::Svm, ModelKind::Rf, ModelKind::Lgbm];
    let mut jobs: Vec<Job> = table8.iter().map(|&k| Job::Balanced(k)).collect();
    jobs.extend(ablated.iter().map(|&k| Job::Raw(k)));
    for f in 0..plan.folds {
        jobs.extend(stack.bases.iter().map(|&k| Job::Fold(f, k)));
    }
    jobs.push(Job::DcsMember(ModelKind::Tree));
    jobs.push(Job::DcsMember(ModelKind::Svm));
    jobs.push(Job::DesBag);

    let outputs: Vec<Trained> = jobs
        .par_iter()
        .map(|job| {
            let r = match job {
                Job::Balanced(k) => train_model(*k, &bal_samples, &cfg.models).map(Trained::Model),
                Job::Raw(k) => train_model(*k, &raw_samples, &cfg.models).map(Trained::Model),
                Job::Fold(f, k) => train_model(*k, &fold_fits[*f], &cfg.models).map(|m| {
                    Trained::Fold(
                        (0..bal_samples.len())
                            .filter(|&i| plan.assignment[i] as usize == *f)
                            .map(|i| (i, m.proba(bal_samples.row(i))))
                            .collect(),
                    )
                }),
                Job::DcsMember(k) => {
                    train_model(*k, &dsel_samples, &cfg.models).map(Trained::Model)
                }
                Job::DesBag => train_bagging(
                    &dsel_samples,
                    &BaggingParams {
                        n_estimators: cfg.fusion.des_pool_size,
                        ..cfg.models.bagging
                    },
                )
                .map(|b| Trained::Model(TrainedModel::Bagging(b))),
            };
            at("train", r)
        })
        .collect::<Result<_>>()?;

    let mut balanced_models: BTreeMap<ModelKind, TrainedModel> = BTreeMap::new();
    let mut raw_models: BTreeMap<ModelKind, TrainedModel> = BTreeMap::new();
    let mut meta_x = vec![vec![0.0; stack.bases.len()]; bal_samples.len()];
    let mut dcs_members = Vec::new();
    let mut des_bag = None;
    for (job, out) in jobs.iter().zip(outputs) {
        match (job, out) {
            (Job::Balanced(k), Trained::Model(m)) => {
                balanced_models.insert(*k, m);
            }
            (Job::Raw(k), Trained::Model(m)) => {
                raw_models.insert(*k, m);
            }
            (Job::Fold(_, k), Trained::Fold(cells)) => {
                let b = stack.bases.iter().position(|x| x == k).expect("stacking base");
                for (i, p) in cells {
                    meta_x[i][b] = p;
                }
            }
            (Job::DcsMember(_), Trained::Model(m)) => dcs_members.push(m),
            (Job::DesBag, Trained::Model(TrainedModel::Bagging(b))) => des_bag = Some(b),
            _ => unreachable!("job and output kinds agree"),
        }
    }

    let stack_bases = stack
        .bases
        .iter()
        .map(|k| balanced_models[k].clone())
        .collect();
    let stacked: StackModel = at(
        "train",
        assemble_stacking(&meta_x, bal_samples.labels(), stack_bases, plan, &stack),
    )?;

    let k = cfg.fusion.k_neighbors;
    let mut dcs_pool = at("fuse", PoolSpec::new(dcs_members))?;
    dcs_pool.k_neighbors = k;
    let dcs_dsel = at("fuse", build_dsel(&dcs_pool, dsel_rows.clone()))?;
    let des_members = des_bag
        .expect("bagging pool trained")
        .members
        .into_iter()
        .map(TrainedModel::Tree)
        .collect();
    let mut des_pool = at("fuse", PoolSpec::new(des_members))?;
    des_pool.k_neighbors = k;
    let des_dsel = at("fuse", build_dsel(&des_pool, dsel_rows))?;

    let mut models = Vec::new();
    for kind in [ModelKind::Svm, ModelKind::Tree, ModelKind::Bagging, ModelKind::Lgbm, ModelKind::Cat] {
        let p = predict_all(&balanced_models[&kind], &test);
        models.push(score_labels(kind.name(), "test", &p, &test));
    }
    let p = predict_fused(&test, &dcs_pool, &dcs_dsel, dcs_la_predict)?;
    models.push(score_labels("dcs_la", "test", &p, &test));
    let p = predict_fused(&test, &des_pool, &des_dsel, knora_e_predict)?;
    models.push(score_labels("des_knora_e", "test", &p, &test));
    let p = predict_all(&balanced_models[&ModelKind::Rf], &test);
    models.push(score_labels("rf", "test", &p, &test));
    let p = predict_all(&stacked, &test);
    models.push(score_labels("stacking", "test", &p, &test));

    let mut ablation = Vec::new();
    for kind in ablated {
        let before = predict_all(&raw_models[&kind], &test);
        ablation.push(score_labels(kind.name(), "before", &before, &test));
        let after = &models
            .iter()
            .find(|s| s.name == kind.name())
            .expect("ablated model is scored")
            .cm;
        ablation.push(Scored::new(kind.name(), "after", *after));
    }

    let mut kpi_rows = Vec::with_capacity(truth.len() + 1);
    for t in &truth {
        kpi_rows.push((t.atm_id.clone(), at("evaluate", kpis(t))?));
    }
    kpi_rows.push(("fleet".to_string(), at("evaluate", fleet_kpis(&truth))?));

    let count_down = |rows: &[LabeledInstance]| rows.iter().filter(|r| r.y == DOWN).count();
    let summary = Summary {
        n_atms: cfg.sim.n_atms,
        n_outages: world.outages.len(),
        n_instances: dataset.len(),
        n_down: count_down(&dataset),
        n_train: train.len(),
        n_train_down: count_down(&train),
        n_test: test.len(),
        n_test_down: count_down(&test),
        n_balanced: balanced.instances.len(),
    };
    Ok(Outcome {
        config: cfg.clone(),
        summary,
        ks,
        baselines,
        ablation,
        models,
        correlation,
        kpis: kpi_rows,
    })
}

/// Runs on a dedicated pool of `threads` workers (`None` = rayon default).
pub fn run_with_threads(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Outcome> {
    match threads {
        None => run_experiment(cfg),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| PipelineError {
                    stage: "config",
                    source: Error::InvalidConfig(e.to_string()),
                })?;
            pool.install(|| run_experiment(cfg))
        }
    }
}
