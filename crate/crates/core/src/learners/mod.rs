//! Base classifiers.
//!
//! Every model is trained from a [`Samples`] matrix with labels in {0,1}
//! (1 = up) and predicts through the [`Classifier`] trait. [`TrainedModel`]
//! wraps them all for storage and uniform dispatch.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::features::LabeledInstance;
use crate::{Error, Result};

mod bagging;
mod boost;
mod forest;
mod logreg;
mod oblivious;
mod presort;
mod svm;
mod tree;

pub use bagging::{train_bagging, BaggingModel, BaggingParams};
pub use boost::{train_lgbm_like, LeafWiseGbdt, LeafWiseParams, RegressionNode, RegressionTree};
pub use forest::{train_random_forest, ForestParams, RandomForest};
pub use logreg::{train_logreg, LogRegObjective, LogRegParams, LogisticRegression};
pub use oblivious::{train_cat_like, ObliviousGbdt, ObliviousParams, ObliviousTree};
pub use presort::ColumnIndex;
pub use svm::{train_svm, train_svm_traced, SvmModel, SvmObjective, SvmParams};
pub use tree::{gini, train_tree, DecisionTree, MaxFeatures, TreeNode, TreeParams};

/// Dense row-major feature matrix with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    data: Vec<f64>,
    dim: usize,
    labels: Vec<u8>,
}

impl Samples {
    pub fn new(rows: &[Vec<f64>], labels: &[u8]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(data, dim, labels.to_vec())
    }

    pub fn from_flat(data: Vec<f64>, dim: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() * dim != data.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * dim,
                got: data.len(),
            });
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::Domain("labels must be 0 or 1".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("features must be finite".into()));
        }
        Ok(Samples { data, dim, labels })
    }

    pub fn from_instances(instances: &[LabeledInstance]) -> Result<Self> {
        let dim = instances.first().map_or(0, |i| i.x.len());
        let mut data = Vec::with_capacity(instances.len() * dim);
        for inst in instances {
            if inst.x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: inst.x.len(),
                });
            }
            data.extend_from_slice(&inst.x);
        }
        Self::from_flat(data, dim, instances.iter().map(|i| i.y).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1)).take(self.len())
    }

    pub fn value(&self, i: usize, feature: usize) -> f64 {
        self.data[i * self.dim + feature]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// `(count of 0, count of 1)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let ones = self.labels.iter().filter(|&&y| y == 1).count();
        (self.len() - ones, ones)
    }

    pub fn subset(&self, indices: &[usize]) -> Samples {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Samples {
            data,
            dim: self.dim,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub(crate) fn require_nonempty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptyTrainingSet)
        } else {
            Ok(())
        }
    }

    pub(crate) fn require_both_classes(&self) -> Result<()> {
        self.require_nonempty()?;
        let (zeros, ones) = self.class_counts();
        if zeros == 0 || ones == 0 {
            Err(Error::SingleClass)
        } else {
            Ok(())
        }
    }
}

/// Uniform prediction interface. `x` is assumed to have the right length;
/// use [`predict_proba`] / [`predict_label`] for checked calls.
pub trait Classifier {
    fn feature_dim(&self) -> usize;

    /// Probability of class 1 (up).
    fn proba(&self, x: &[f64]) -> f64;

    fn label(&self, x: &[f64]) -> u8 {
        u8::from(self.proba(x) >= 0.5)
    }
}

fn check_dim(model: &(impl Classifier + ?Sized), x: &[f64]) -> Result<()> {
    if x.len() != model.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.feature_dim(),
            got: x.len(),
        });
    }
    Ok(())
}

pub fn predict_proba(model: &(impl Classifier + ?Sized), x: &[f64]) -> Result<f64> {
    check_dim(model, x)?;
    Ok(model.proba(x))
}

pub fn predict_label(model: &(impl Classifier + ?Sized), x: &[f64]) -> Result<u8> {
    check_dim(model, x)?;
    Ok(model.label(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Svm,
    Tree,
    Bagging,
    Rf,
    Lgbm,
    Cat,
    Logreg,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Svm,
        ModelKind::Tree,
        ModelKind::Bagging,
        ModelKind::Rf,
        ModelKind::Lgbm,
        ModelKind::Cat,
        ModelKind::Logreg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Svm => "svm",
            ModelKind::Tree => "tree",
            ModelKind::Bagging => "bagging",
            ModelKind::Rf => "rf",
            ModelKind::Lgbm => "lgbm",
            ModelKind::Cat => "cat",
            ModelKind::Logreg => "logreg",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Any fitted base classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    Svm(SvmModel),
    Tree(DecisionTree),
    Bagging(BaggingModel),
    Rf(RandomForest),
    Lgbm(LeafWiseGbdt),
    Cat(ObliviousGbdt),
    Logreg(LogisticRegression),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Svm(_) => ModelKind::Svm,
            TrainedModel::Tree(_) => ModelKind::Tree,
            TrainedModel::Bagging(_) => ModelKind::Bagging,
            TrainedModel::Rf(_) => ModelKind::Rf,
            TrainedModel::Lgbm(_) => ModelKind::Lgbm,
            TrainedModel::Cat(_) => ModelKind::Cat,
            TrainedModel::Logreg(_) => ModelKind::Logreg,
        }
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            TrainedModel::Svm(m) => m,
            TrainedModel::Tree(m) => m,
            TrainedModel::Bagging(m) => m,
            TrainedModel::Rf(m) => m,
            TrainedModel::Lgbm(m) => m,
            TrainedModel::Cat(m) => m,
            TrainedModel::Logreg(m) => m,
        }
    }
}

impl Classifier for TrainedModel {
    fn feature_dim(&self) -> usize {
        self.inner().feature_dim()
    }

    fn proba(&self, x: &[f64]) -> f64 {
        self.inner().proba(x)
    }

    fn label(&self, x: &[f64]) -> u8 {
        self.inner().label(x)
    }
}

/// Hyperparameters for every family, as one bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct ModelParams {
    pub svm: SvmParams,
    pub tree: TreeParams,
    pub bagging: BaggingParams,
    pub forest: ForestParams,
    pub lgbm: LeafWiseParams,
    pub cat: ObliviousParams,
    pub logreg: LogRegParams,
}


impl ModelParams {
    /// Defaults with the seeded families reseeded.
    pub fn with_seed(seed: u64) -> Self {
        let mut p = ModelParams::default();
        p.bagging.seed = seed;
        p.forest.seed = seed;
        p
    }
}

pub fn train_model(kind: ModelKind, train: &Samples, params: &ModelParams) -> Result<TrainedModel> {
    Ok(match kind {
        ModelKind::Svm => TrainedModel::Svm(train_svm(train, &params.svm)?),
        ModelKind::Tree => TrainedModel::Tree(train_tree(train, &params.tree)?),
        ModelKind::Bagging => TrainedModel::Bagging(train_bagging(train, &params.bagging)?),
        ModelKind::Rf => TrainedModel::Rf(train_random_forest(train, &params.forest)?),
        ModelKind::Lgbm => TrainedModel::Lgbm(train_lgbm_like(train, &params.lgbm)?),
        ModelKind::Cat => TrainedModel::Cat(train_cat_like(train, &params.cat)?),
        ModelKind::Logreg => TrainedModel::Logreg(train_logreg(train, &params.logreg)?),
    })
}

/// Trains `kind` with default hyperparameters and the given seed.
pub fn train_default(kind: ModelKind, train: &Samples, seed: u64) -> Result<TrainedModel> {
    train_model(kind, train, &ModelParams::with_seed(seed))
}
