use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::bagging::bootstrap_counts;
use super::presort::ColumnIndex;
use super::tree::{grow_tree, DecisionTree, MaxFeatures, TreeParams};
use super::{Classifier, Samples};
use crate::rng::Stream;
use crate::{Error, Result};

const TAG_FOREST: u64 = 0xf04e57;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            min_samples_leaf: 1,
            seed: 1,
        }
    }
}

/// Random forest; probability is the fraction of trees voting up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub params: ForestParams,
    pub feature_dim: usize,
    pub trees: Vec<DecisionTree>,
}

impl Classifier for RandomForest {
    fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    fn proba(&self, x: &[f64]) -> f64 {
        let ups = self.trees.iter().filter(|t| t.label(x) == 1).count();
        ups as f64 / self.trees.len() as f64
    }
}

pub fn train_random_forest(train: &Samples, params: &ForestParams) -> Result<RandomForest> {
    train.require_nonempty()?;
    if params.n_trees == 0 {
        return Err(Error::InvalidConfig("n_trees must be positive".into()));
    }
    let n = train.len();
    let index = ColumnIndex::new(train);
    let tree_params = TreeParams {
        min_samples_leaf: params.min_samples_leaf,
        max_features: MaxFeatures::Sqrt,
        ..TreeParams::default()
    };
    let trees = (0..params.n_trees)
        .map(|i| {
            let mut rng = Stream::new(params.seed, &[TAG_FOREST, i as u64]);
            let counts = bootstrap_counts(&mut rng, n, n);
            grow_tree(&index, train.labels(), Some(&counts), &tree_params, Some(&mut rng))
        })
        .collect();
    Ok(RandomForest {
        params: *params,
        feature_dim: train.dim(),
        trees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_forest() {
        let s = Samples::new(&[vec![1.0, 2.0]], &[0]).unwrap();
        let f = train_random_forest(&s, &ForestParams::default()).unwrap();
        assert_eq!(f.label(&[1.0, 2.0]), 0);
        assert_eq!(f.proba(&[9.0, 9.0]), 0.0);
    }

    #[test]
    fn deterministic() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i % 7) as f64, (i % 5) as f64, i as f64])
            .collect();
        let y: Vec<u8> = (0..40).map(|i| u8::from((i % 7 + i % 5) > 5)).collect();
        let s = Samples::new(&rows, &y).unwrap();
        let p = ForestParams {
            n_trees: 10,
            ..ForestParams::default()
        };
        assert_eq!(train_random_forest(&s, &p).unwrap(), train_random_forest(&s, &p).unwrap());
    }
}
