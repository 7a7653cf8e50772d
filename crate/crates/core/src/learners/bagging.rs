use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::presort::ColumnIndex;
use super::tree::{grow_tree, DecisionTree, MaxFeatures, TreeParams};
use super::{Classifier, Samples};
use crate::rng::Stream;
use crate::{Error, Result};

const TAG_BAGGING: u64 = 0xba6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaggingParams {
    pub n_estimators: usize,
    /// Bootstrap size as a fraction of the training set.
    pub max_samples: f64,
    pub seed: u64,
}

impl Default for BaggingParams {
    fn default() -> Self {
        BaggingParams {
            n_estimators: 3,
            max_samples: 1.0,
            seed: 1,
        }
    }
}

/// Bootstrap multiplicities: `draws` picks with replacement out of `n`.
pub(crate) fn bootstrap_counts(rng: &mut Stream, n: usize, draws: usize) -> Vec<u32> {
    let mut counts = vec![0u32; n];
    for _ in 0..draws {
        counts[rng.below(n)] += 1;
    }
    counts
}

/// Bagged CART trees. Label is the majority vote (ties go up), probability
/// the mean of member probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaggingModel {
    pub params: BaggingParams,
    pub feature_dim: usize,
    pub members: Vec<DecisionTree>,
}

impl Classifier for BaggingModel {
    fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    fn proba(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.members.iter().map(|m| m.proba(x)).sum();
        sum / self.members.len() as f64
    }

    fn label(&self, x: &[f64]) -> u8 {
        let ups = self.members.iter().filter(|m| m.label(x) == 1).count();
        u8::from(2 * ups >= self.members.len())
    }
}

pub fn train_bagging(train: &Samples, params: &BaggingParams) -> Result<BaggingModel> {
    train.require_nonempty()?;
    if params.n_estimators == 0 {
        return Err(Error::InvalidConfig("n_estimators must be positive".into()));
    }
    if !(params.max_samples > 0.0 && params.max_samples <= 1.0) {
        return Err(Error::InvalidConfig("max_samples must be in (0, 1]".into()));
    }
    let n = train.len();
    let draws = ((params.max_samples * n as f64 + 0.5) as usize).max(1);
    let index = ColumnIndex::new(train);
    let tree_params = TreeParams {
        max_features: MaxFeatures::All,
        ..TreeParams::default()
    };
    let members = (0..params.n_estimators)
        .map(|i| {
            let mut rng = Stream::new(params.seed, &[TAG_BAGGING, i as u64]);
            let counts = bootstrap_counts(&mut rng, n, draws);
            grow_tree(&index, train.labels(), Some(&counts), &tree_params, None)
        })
        .collect();
    Ok(BaggingModel {
        params: *params,
        feature_dim: train.dim(),
        members,
    })
}
