use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::features::LabeledInstance;
use crate::learners::{
    predict_proba, train_logreg, train_model, Classifier, LogisticRegression, ModelKind,
    ModelParams, Samples, TrainedModel,
};
use crate::rng::Stream;
use crate::{Error, Result};

const TAG_FOLDS: u64 = 0xf01d;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackingParams {
    pub bases: Vec<ModelKind>,
    pub folds: usize,
    /// Seeds the fold plan.
    pub seed: u64,
    /// Base-model hyperparameters; the meta-learner uses `models.logreg`.
    pub models: ModelParams,
}

impl Default for StackingParams {
    fn default() -> Self {
        StackingParams {
            bases: vec![ModelKind::Rf, ModelKind::Lgbm, ModelKind::Cat],
            folds: 5,
            seed: 1,
            models: ModelParams::with_seed(1),
        }
    }
}

/// Fold of every training row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: usize,
    pub seed: u64,
    pub assignment: Vec<u8>,
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin.
pub fn stratified_folds(labels: &[u8], folds: usize, seed: u64) -> Result<FoldPlan> {
    if !(2..=255).contains(&folds) {
        return Err(Error::InvalidConfig("fold count must be in 2..=255".into()));
    }
    let mut assignment = vec![0u8; labels.len()];
    for class in [0u8, 1u8] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                got: idx.len(),
            });
        }
        let mut rng = Stream::new(seed, &[TAG_FOLDS, class as u64]);
        rng.shuffle(&mut idx);
        for (k, &i) in idx.iter().enumerate() {
            assignment[i] = (k % folds) as u8;
        }
    }
    Ok(FoldPlan {
        folds,
        seed,
        assignment,
    })
}

/// Base models refit on the full training set plus a logistic meta-learner
/// over their probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackModel {
    pub bases: Vec<TrainedModel>,
    pub meta: LogisticRegression,
    pub fold_plan: FoldPlan,
}

impl StackModel {
    pub fn meta_features(&self, x: &[f64]) -> Vec<f64> {
        self.bases.iter().map(|b| b.proba(x)).collect()
    }
}

impl Classifier for StackModel {
    fn feature_dim(&self) -> usize {
        self.bases[0].feature_dim()
    }

    fn proba(&self, x: &[f64]) -> f64 {
        self.meta.proba(&self.meta_features(x))
    }
}

/// Out-of-fold base probabilities (rows × bases), the meta training matrix.
pub fn out_of_fold(
    train: &Samples,
    plan: &FoldPlan,
    bases: &[ModelKind],
    models: &ModelParams,
) -> Result<Vec<Vec<f64>>> {
    let mut meta = vec![vec![0.0; bases.len()]; train.len()];
    for fold in 0..plan.folds {
        let (held, kept): (Vec<usize>, Vec<usize>) =
            (0..train.len()).partition(|&i| plan.assignment[i] as usize == fold);
        if held.is_empty() {
            continue;
        }
        let fit = train.subset(&kept);
        for (b, &kind) in bases.iter().enumerate() {
            let model = train_model(kind, &fit, models)?;
            for &i in &held {
                meta[i][b] = model.proba(train.row(i));
            }
        }
    }
    Ok(meta)
}

pub fn fit_stacking(train: &[LabeledInstance], params: &StackingParams) -> Result<StackModel> {
    if params.bases.is_empty() {
        return Err(Error::InvalidConfig("stacking needs at least one base".into()));
    }
    let samples = Samples::from_instances(train)?;
    samples.require_both_classes()?;
    let plan = stratified_folds(samples.labels(), params.folds, params.seed)?;
    let meta_x = out_of_fold(&samples, &plan, &params.bases, &params.models)?;
    let bases = params
        .bases
        .iter()
        .map(|&k| train_model(k, &samples, &params.models))
        .collect::<Result<Vec<_>>>()?;
    assemble_stacking(&meta_x, samples.labels(), bases, plan, params)
}

/// Fits the meta-learner on a precomputed out-of-fold matrix and attaches
/// already-trained full-data bases (which must follow `params.bases`).
pub fn assemble_stacking(
    meta_x: &[Vec<f64>],
    labels: &[u8],
    bases: Vec<TrainedModel>,
    plan: FoldPlan,
    params: &StackingParams,
) -> Result<StackModel> {
    if bases.len() != params.bases.len() || bases.iter().zip(&params.bases).any(|(b, k)| b.kind() != *k) {
        return Err(Error::InvalidPool("bases do not match the stacking plan".into()));
    }
    let meta_samples = Samples::new(meta_x, labels)?;
    let meta = train_logreg(&meta_samples, &params.models.logreg)?;
    Ok(StackModel {
        bases,
        meta,
        fold_plan: plan,
    })
}

/// Checked prediction: `(label, probability of up)`.
pub fn stacking_predict(model: &StackModel, x: &[f64]) -> Result<(u8, f64)> {
    let p = predict_proba(model, x)?;
    Ok((u8::from(p >= 0.5), p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_stratified() {
        let labels: Vec<u8> = (0..53).map(|i| u8::from(i % 4 == 0)).collect();
        let plan = stratified_folds(&labels, 5, 3).unwrap();
        for f in 0..5u8 {
            let ones = (0..53)
                .filter(|&i| plan.assignment[i] == f && labels[i] == 1)
                .count();
            assert!((2..=3).contains(&ones));
        }
    }

    #[test]
    fn lone_minority_is_an_error() {
        assert!(stratified_folds(&[0, 0, 0, 1], 5, 1).is_err());
    }
}
