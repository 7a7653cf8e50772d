use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::presort::{midpoint, partition_orders, ColumnIndex};
use super::{Classifier, Samples};
use crate::math::{ceil, sqrt};
use crate::rng::Stream;
use crate::Result;

/// Gini impurity of a weighted two-class node.
pub fn gini(w0: f64, w1: f64) -> f64 {
    let total = w0 + w1;
    if total <= 0.0 {
        return 0.0;
    }
    let p0 = w0 / total;
    let p1 = w1 / total;
    1.0 - p0 * p0 - p1 * p1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    /// `ceil(sqrt(d))` features drawn per split.
    Sqrt,
}

impl MaxFeatures {
    pub fn count(self, dim: usize) -> usize {
        match self {
            MaxFeatures::All => dim,
            MaxFeatures::Sqrt => (ceil(sqrt(dim as f64)) as usize).clamp(1, dim.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    /// Weighted class counts of the training rows that reached the leaf.
    Leaf { down: f64, up: f64 },
}

/// CART classification tree. `x[feature] <= threshold` goes left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub params: TreeParams,
    pub feature_dim: usize,
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn leaf_for(&self, x: &[f64]) -> (f64, f64) {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
                TreeNode::Leaf { down, up } => return (*down, *up),
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Split { left, right, .. } => {
                    1 + go(nodes, *left as usize).max(go(nodes, *right as usize))
                }
                TreeNode::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}

impl Classifier for DecisionTree {
    fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    fn proba(&self, x: &[f64]) -> f64 {
        let (down, up) = self.leaf_for(x);
        up / (down + up)
    }
}

pub fn train_tree(train: &Samples, params: &TreeParams) -> Result<DecisionTree> {
    train.require_nonempty()?;
    let index = ColumnIndex::new(train);
    Ok(grow_tree(&index, train.labels(), None, params, None))
}

struct Best {
    score: f64,
    feature: usize,
    pos: usize,
    threshold: f64,
}

/// Grows a tree on the rows with nonzero `weights` (all rows when `None`).
/// `rng` is required when `params.max_features` draws a subset.
pub(crate) fn grow_tree(
    index: &ColumnIndex,
    labels: &[u8],
    weights: Option<&[u32]>,
    params: &TreeParams,
    mut rng: Option<&mut Stream>,
) -> DecisionTree {
    let dim = index.dim();
    let weight = |r: u32| weights.map_or(1.0, |w| w[r as usize] as f64);
    let mut orders = index.active_orders(weights);
    let m = orders.first().map_or(0, Vec::len);
    let min_split = params.min_samples_split.max(2) as f64;
    let min_leaf = params.min_samples_leaf.max(1) as f64;
    let n_try = params.max_features.count(dim);

    let mut nodes = vec![TreeNode::Leaf { down: 0.0, up: 0.0 }];
    let mut stack = vec![(0usize, 0usize, m)];
    let mut goes_left = vec![false; index.len()];
    let mut scratch = Vec::new();
    let mut features: Vec<usize> = (0..dim).collect();

    while let Some((node, lo, hi)) = stack.pop() {
        let (mut w0, mut w1) = (0.0, 0.0);
        if dim > 0 {
            for &r in &orders[0][lo..hi] {
                if labels[r as usize] == 1 {
                    w1 += weight(r);
                } else {
                    w0 += weight(r);
                }
            }
        } else {
            // No features: a single leaf over everything.
            for r in 0..index.len() as u32 {
                if weights.is_none_or(|w| w[r as usize] > 0) {
                    if labels[r as usize] == 1 {
                        w1 += weight(r);
                    } else {
                        w0 += weight(r);
                    }
                }
            }
        }
        nodes[node] = TreeNode::Leaf { down: w0, up: w1 };
        let total = w0 + w1;
        if w0 == 0.0 || w1 == 0.0 || total < min_split || dim == 0 {
            continue;
        }

        // Candidate features: all, or a random draw that keeps going past
        // the quota while no valid split has been found.
        if n_try < dim {
            if let Some(r) = rng.as_deref_mut() {
                r.shuffle(&mut features);
            }
        }
        let mut best: Option<Best> = None;
        for (tried, &f) in features.iter().enumerate() {
            if tried >= n_try && best.is_some() {
                break;
            }
            let col = &index.columns[f];
            let order = &orders[f][lo..hi];
            let (mut l0, mut l1) = (0.0, 0.0);
            for p in 0..order.len() - 1 {
                let r = order[p];
                if labels[r as usize] == 1 {
                    l1 += weight(r);
                } else {
                    l0 += weight(r);
                }
                let v = col[r as usize];
                let next = col[order[p + 1] as usize];
                if next <= v {
                    continue;
                }
                let wl = l0 + l1;
                let wr = total - wl;
                if wl < min_leaf || wr < min_leaf {
                    continue;
                }
                let (r0, r1) = (w0 - l0, w1 - l1);
                // Weighted child impurity times total; smaller is better.
                let score = l0 * l1 / wl + r0 * r1 / wr;
                if best.as_ref().is_none_or(|b| score < b.score) {
                    best = Some(Best {
                        score,
                        feature: f,
                        pos: p + 1,
                        threshold: midpoint(v, next),
                    });
                }
            }
        }
        let Some(best) = best else { continue };

        for &r in &orders[best.feature][lo..hi] {
            goes_left[r as usize] = false;
        }
        for &r in &orders[best.feature][lo..lo + best.pos] {
            goes_left[r as usize] = true;
        }
        let n_left = partition_orders(&mut orders, lo, hi, &goes_left, &mut scratch);
        debug_assert_eq!(n_left, best.pos);
        let left = nodes.len();
        nodes.push(TreeNode::Leaf { down: 0.0, up: 0.0 });
        nodes.push(TreeNode::Leaf { down: 0.0, up: 0.0 });
        nodes[node] = TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: left as u32,
            right: left as u32 + 1,
        };
        stack.push((left + 1, lo + n_left, hi));
        stack.push((left, lo, lo + n_left));
    }

    DecisionTree {
        params: *params,
        feature_dim: dim,
        nodes,
    }
}
