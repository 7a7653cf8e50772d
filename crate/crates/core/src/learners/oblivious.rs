use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::boost::{check_boost, gradients, leaf_gain_term, prior_log_odds};
use super::presort::{midpoint, ColumnIndex};
use super::{Classifier, Samples};
use crate::math::sigmoid;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObliviousParams {
    pub n_rounds: usize,
    pub depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
}

impl Default for ObliviousParams {
    fn default() -> Self {
        ObliviousParams {
            n_rounds: 100,
            depth: 6,
            learning_rate: 0.1,
            lambda: 1.0,
        }
    }
}

/// Symmetric tree: level `l` tests `x[features[l]] > thresholds[l]` for
/// every node, so the leaf index is the bit string of those outcomes
/// (first level is the most significant bit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObliviousTree {
    pub features: Vec<usize>,
    pub thresholds: Vec<f64>,
    pub leaf_values: Vec<f64>,
}

impl ObliviousTree {
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        self.features
            .iter()
            .zip(&self.thresholds)
            .fold(0, |idx, (&f, &t)| idx * 2 + usize::from(x[f] > t))
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.leaf_values[self.leaf_index(x)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObliviousGbdt {
    pub params: ObliviousParams,
    pub feature_dim: usize,
    pub base_score: f64,
    pub trees: Vec<ObliviousTree>,
}

impl ObliviousGbdt {
    pub fn raw_score_upto(&self, x: &[f64], rounds: usize) -> f64 {
        self.base_score
            + self
                .trees
                .iter()
                .take(rounds)
                .map(|t| t.predict(x))
                .sum::<f64>()
    }

    pub fn raw_score(&self, x: &[f64]) -> f64 {
        self.raw_score_upto(x, self.trees.len())
    }
}

impl Classifier for ObliviousGbdt {
    fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    fn proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.raw_score(x))
    }
}

/// Picks the shared split for one level. Rows sweep each feature in sorted
/// order moving from the right child to the left child of their own leaf,
/// and the total score is updated incrementally.
fn best_level_split(
    index: &ColumnIndex,
    g: &[f64],
    h: &[f64],
    leaf_of: &[usize],
    n_leaves: usize,
    lambda: f64,
) -> (usize, f64) {
    let mut tot_g = vec![0.0; n_leaves];
    let mut tot_h = vec![0.0; n_leaves];
    for (r, &j) in leaf_of.iter().enumerate() {
        tot_g[j] += g[r];
        tot_h[j] += h[r];
    }
    let base: f64 = (0..n_leaves)
        .map(|j| leaf_gain_term(tot_g[j], tot_h[j], lambda))
        .sum();
    let mut best: Option<(f64, usize, f64)> = None;
    let mut lg = vec![0.0; n_leaves];
    let mut lh = vec![0.0; n_leaves];
    for (f, order) in index.sorted.iter().enumerate() {
        let col = &index.columns[f];
        lg.iter_mut().for_each(|v| *v = 0.0);
        lh.iter_mut().for_each(|v| *v = 0.0);
        let mut score = base;
        for p in 0..order.len().saturating_sub(1) {
            let r = order[p] as usize;
            let j = leaf_of[r];
            let before = leaf_gain_term(lg[j], lh[j], lambda)
                + leaf_gain_term(tot_g[j] - lg[j], tot_h[j] - lh[j], lambda);
            lg[j] += g[r];
            lh[j] += h[r];
            let after = leaf_gain_term(lg[j], lh[j], lambda)
                + leaf_gain_term(tot_g[j] - lg[j], tot_h[j] - lh[j], lambda);
            score += after - before;
            let v = col[r];
            let next = col[order[p + 1] as usize];
            if next <= v {
                continue;
            }
            let gain = score - base;
            if best.is_none_or(|(b, _, _)| gain > b) {
                best = Some((gain, f, midpoint(v, next)));
            }
        }
    }
    match best {
        Some((_, f, t)) => (f, t),
        // Every feature constant: a split that sends everything left.
        None => (0, index.columns[0].iter().copied().fold(f64::MIN, f64::max)),
    }
}

pub fn train_cat_like(train: &Samples, params: &ObliviousParams) -> Result<ObliviousGbdt> {
    train.require_nonempty()?;
    check_boost(params.learning_rate, params.lambda)?;
    if params.depth == 0 || params.depth > 16 {
        return Err(Error::InvalidConfig("depth must be in 1..=16".into()));
    }
    let n = train.len();
    let base_score = prior_log_odds(train.labels());
    let mut model = ObliviousGbdt {
        params: *params,
        feature_dim: train.dim(),
        base_score,
        trees: Vec::with_capacity(params.n_rounds),
    };
    if train.dim() == 0 {
        return Ok(model);
    }
    let index = ColumnIndex::new(train);
    let mut scores = vec![base_score; n];
    let (mut g, mut h) = (vec![0.0; n], vec![0.0; n]);
    let mut leaf_of = vec![0usize; n];
    for _ in 0..params.n_rounds {
        gradients(&scores, train.labels(), &mut g, &mut h);
        leaf_of.iter_mut().for_each(|j| *j = 0);
        let mut features = Vec::with_capacity(params.depth);
        let mut thresholds = Vec::with_capacity(params.depth);
        for level in 0..params.depth {
            let (f, t) = best_level_split(&index, &g, &h, &leaf_of, 1 << level, params.lambda);
            for (r, j) in leaf_of.iter_mut().enumerate() {
                *j = *j * 2 + usize::from(index.columns[f][r] > t);
            }
            features.push(f);
            thresholds.push(t);
        }
        let n_leaves = 1usize << params.depth;
        let mut sg = vec![0.0; n_leaves];
        let mut sh = vec![0.0; n_leaves];
        for (r, &j) in leaf_of.iter().enumerate() {
            sg[j] += g[r];
            sh[j] += h[r];
        }
        let leaf_values: Vec<f64> = (0..n_leaves)
            .map(|j| -sg[j] / (sh[j] + params.lambda) * params.learning_rate)
            .collect();
        for (r, &j) in leaf_of.iter().enumerate() {
            scores[r] += leaf_values[j];
        }
        model.trees.push(ObliviousTree {
            features,
            thresholds,
            leaf_values,
        });
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_is_symmetric() {
        let rows: Vec<Vec<f64>> = (0..64).map(|i| vec![(i % 8) as f64, (i / 8) as f64]).collect();
        let y: Vec<u8> = (0..64).map(|i| u8::from(i % 8 + i / 8 > 7)).collect();
        let s = Samples::new(&rows, &y).unwrap();
        let m = train_cat_like(&s, &ObliviousParams::default()).unwrap();
        for t in &m.trees {
            assert_eq!(t.features.len(), 6);
            assert_eq!(t.leaf_values.len(), 64);
        }
        let acc = rows
            .iter()
            .zip(&y)
            .filter(|(x, &l)| m.label(x) == l)
            .count();
        assert_eq!(acc, 64);
    }

    #[test]
    fn depth_one_is_stump() {
        let s = Samples::new(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]], &[0, 0, 1, 1]).unwrap();
        let p = ObliviousParams {
            depth: 1,
            n_rounds: 3,
            ..ObliviousParams::default()
        };
        let m = train_cat_like(&s, &p).unwrap();
        assert!(m.trees.iter().all(|t| t.thresholds == vec![1.5]));
    }
}
