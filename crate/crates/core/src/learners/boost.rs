use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::presort::{midpoint, partition_orders, ColumnIndex};
use super::{Classifier, Samples};
use crate::math::{ln, sigmoid};
use crate::{Error, Result};

/// Log-odds of the label mean, clamped away from the infinities.
pub(crate) fn prior_log_odds(labels: &[u8]) -> f64 {
    let ones = labels.iter().filter(|&&y| y == 1).count() as f64;
    let p = (ones / labels.len() as f64).clamp(1e-12, 1.0 - 1e-12);
    ln(p / (1.0 - p))
}

/// First and second derivatives of the logistic loss at each raw score.
pub(crate) fn gradients(scores: &[f64], labels: &[u8], g: &mut [f64], h: &mut [f64]) {
    for i in 0..scores.len() {
        let p = sigmoid(scores[i]);
        g[i] = p - labels[i] as f64;
        h[i] = p * (1.0 - p);
    }
}

pub(crate) fn leaf_gain_term(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

pub(crate) fn check_boost(rounds_lr: f64, lambda: f64) -> Result<()> {
    if !(rounds_lr > 0.0 && rounds_lr.is_finite()) {
        return Err(Error::InvalidConfig("learning rate must be positive".into()));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig("lambda must be non-negative".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeafWiseParams {
    pub n_rounds: usize,
    pub num_leaves: usize,
    /// `None` means unlimited.
    pub max_depth: Option<usize>,
    pub learning_rate: f64,
    pub lambda: f64,
    pub min_data_in_leaf: usize,
}

impl Default for LeafWiseParams {
    fn default() -> Self {
        LeafWiseParams {
            n_rounds: 100,
            num_leaves: 31,
            max_depth: None,
            learning_rate: 0.1,
            lambda: 1.0,
            min_data_in_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum RegressionNode {
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
    },
}

/// Regression tree whose leaf values are already scaled by the learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<RegressionNode>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                RegressionNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    }
                }
                RegressionNode::Leaf { value } => return *value,
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, RegressionNode::Leaf { .. }))
            .count()
    }
}

/// Gradient-boosted trees grown best-first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafWiseGbdt {
    pub params: LeafWiseParams,
    pub feature_dim: usize,
    pub base_score: f64,
    pub trees: Vec<RegressionTree>,
}

impl LeafWiseGbdt {
    /// Raw score using only the first `rounds` trees.
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

impl Classifier for LeafWiseGbdt {
    fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    fn proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.raw_score(x))
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    pos: usize,
    threshold: f64,
}

struct OpenLeaf {
    node: usize,
    lo: usize,
    hi: usize,
    depth: usize,
    g: f64,
    h: f64,
    best: Option<Candidate>,
}

struct Grower<'a> {
    index: &'a ColumnIndex,
    g: &'a [f64],
    h: &'a [f64],
    params: &'a LeafWiseParams,
}

impl Grower<'_> {
    fn sums(&self, rows: &[u32]) -> (f64, f64) {
        rows.iter().fold((0.0, 0.0), |(g, h), &r| {
            (g + self.g[r as usize], h + self.h[r as usize])
        })
    }

    fn best_split(&self, orders: &[Vec<u32>], leaf: &OpenLeaf) -> Option<Candidate> {
        if self.params.max_depth.is_some_and(|d| leaf.depth >= d) {
            return None;
        }
        let lambda = self.params.lambda;
        let min_leaf = self.params.min_data_in_leaf.max(1);
        let count = leaf.hi - leaf.lo;
        if count < 2 * min_leaf {
            return None;
        }
        let parent = leaf_gain_term(leaf.g, leaf.h, lambda);
        let mut best: Option<Candidate> = None;
        for (f, order) in orders.iter().enumerate() {
            let col = &self.index.columns[f];
            let order = &order[leaf.lo..leaf.hi];
            let (mut gl, mut hl) = (0.0, 0.0);
            for p in 0..count - 1 {
                let r = order[p] as usize;
                gl += self.g[r];
                hl += self.h[r];
                let v = col[r];
                let next = col[order[p + 1] as usize];
                if next <= v || p + 1 < min_leaf || count - p - 1 < min_leaf {
                    continue;
                }
                let gain = leaf_gain_term(gl, hl, lambda)
                    + leaf_gain_term(leaf.g - gl, leaf.h - hl, lambda)
                    - parent;
                if best.is_none_or(|b| gain > b.gain) {
                    best = Some(Candidate {
                        gain,
                        feature: f,
                        pos: p + 1,
                        threshold: midpoint(v, next),
                    });
                }
            }
        }
        best.filter(|b| b.gain > 0.0)
    }
}

fn grow_round(
    index: &ColumnIndex,
    g: &[f64],
    h: &[f64],
    params: &LeafWiseParams,
    scores: &mut [f64],
    goes_left: &mut [bool],
) -> RegressionTree {
    let grower = Grower {
        index,
        g,
        h,
        params,
    };
    let mut orders = index.sorted.clone();
    let n = index.len();
    let mut nodes = vec![RegressionNode::Leaf { value: 0.0 }];
    let (g0, h0) = grower.sums(&orders[0]);
    let mut root = OpenLeaf {
        node: 0,
        lo: 0,
        hi: n,
        depth: 0,
        g: g0,
        h: h0,
        best: None,
    };
    root.best = grower.best_split(&orders, &root);
    let mut leaves = vec![root];
    let mut scratch = Vec::new();

    while leaves.len() < params.num_leaves.max(1) {
        let mut pick: Option<usize> = None;
        for (i, leaf) in leaves.iter().enumerate() {
            if let Some(c) = leaf.best {
                if pick.is_none_or(|p| c.gain > leaves[p].best.unwrap().gain) {
                    pick = Some(i);
                }
            }
        }
        let Some(i) = pick else { break };
        let OpenLeaf {
            node, lo, hi, depth, ..
        } = leaves[i];
        let c = leaves[i].best.unwrap();
        for &r in &orders[c.feature][lo..hi] {
            goes_left[r as usize] = false;
        }
        for &r in &orders[c.feature][lo..lo + c.pos] {
            goes_left[r as usize] = true;
        }
        let n_left = partition_orders(&mut orders, lo, hi, goes_left, &mut scratch);
        let left = nodes.len();
        nodes.push(RegressionNode::Leaf { value: 0.0 });
        nodes.push(RegressionNode::Leaf { value: 0.0 });
        nodes[node] = RegressionNode::Split {
            feature: c.feature,
            threshold: c.threshold,
            left: left as u32,
            right: left as u32 + 1,
        };
        let make = |node: usize, lo: usize, hi: usize| {
            let (g, h) = grower.sums(&orders[0][lo..hi]);
            let mut leaf = OpenLeaf {
                node,
                lo,
                hi,
                depth: depth + 1,
                g,
                h,
                best: None,
            };
            leaf.best = grower.best_split(&orders, &leaf);
            leaf
        };
        let l = make(left, lo, lo + n_left);
        let r = make(left + 1, lo + n_left, hi);
        leaves[i] = l;
        leaves.push(r);
    }

    for leaf in &leaves {
        let value = -leaf.g / (leaf.h + params.lambda) * params.learning_rate;
        nodes[leaf.node] = RegressionNode::Leaf { value };
        for &r in &orders[0][leaf.lo..leaf.hi] {
            scores[r as usize] += value;
        }
    }
    RegressionTree { nodes }
}

pub fn train_lgbm_like(train: &Samples, params: &LeafWiseParams) -> Result<LeafWiseGbdt> {
    train.require_nonempty()?;
    check_boost(params.learning_rate, params.lambda)?;
    let n = train.len();
    let base_score = prior_log_odds(train.labels());
    let mut model = LeafWiseGbdt {
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
    let mut goes_left = vec![false; n];
    for _ in 0..params.n_rounds {
        gradients(&scores, train.labels(), &mut g, &mut h);
        let tree = grow_round(&index, &g, &h, params, &mut scores, &mut goes_left);
        model.trees.push(tree);
    }
    Ok(model)
}
