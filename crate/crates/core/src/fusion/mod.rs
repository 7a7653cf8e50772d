//! Classifier fusion: dynamic classifier selection by overall local
//! accuracy, KNORA-Eliminate dynamic ensemble selection, and stacking.

use alloc::vec;
use alloc::vec::Vec;

use crate::features::LabeledInstance;
use crate::learners::{Classifier, TrainedModel};
use crate::rng::Stream;
use crate::{Error, Result, UP};

mod knn;
mod stacking;

pub use knn::NeighborIndex;
pub use stacking::{
    assemble_stacking, fit_stacking, out_of_fold, stacking_predict, stratified_folds, FoldPlan,
    StackModel, StackingParams,
};

pub const DEFAULT_K: usize = 7;
/// Share of the real training partition held out as the selection set.
pub const DSEL_FRACTION: f64 = 0.33;

const TAG_DSEL: u64 = 0xd5e1;

/// Held-out selection set with each pool member's correctness per instance.
pub struct Dsel {
    pub instances: Vec<LabeledInstance>,
    n_classifiers: usize,
    correct: Vec<bool>,
    index: NeighborIndex,
}

impl Dsel {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn n_classifiers(&self) -> usize {
        self.n_classifiers
    }

    pub fn correct(&self, instance: usize, classifier: usize) -> bool {
        self.correct[instance * self.n_classifiers + classifier]
    }

    /// `k` nearest selection instances to `x`, nearest first, ties by index.
    pub fn neighbors(&self, x: &[f64], k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > self.len() {
            return Err(Error::NeighborhoodTooLarge {
                k,
                size: self.len(),
            });
        }
        Ok(self.index.query(x, k).into_iter().map(|(i, _)| i).collect())
    }
}

/// Pool members plus the neighbourhood size.
pub struct PoolSpec {
    pub members: Vec<TrainedModel>,
    pub k_neighbors: usize,
}

impl PoolSpec {
    pub fn new(members: Vec<TrainedModel>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidPool("pool is empty".into()));
        }
        let dim = members[0].feature_dim();
        if let Some(m) = members.iter().find(|m| m.feature_dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: m.feature_dim(),
            });
        }
        Ok(PoolSpec {
            members,
            k_neighbors: DEFAULT_K,
        })
    }
}

/// Label plus a probability of up consistent with it (`label = proba >= 0.5`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub label: u8,
    pub proba: f64,
}

pub fn build_dsel(pool: &PoolSpec, validation: Vec<LabeledInstance>) -> Result<Dsel> {
    if validation.is_empty() {
        return Err(Error::EmptyDsel);
    }
    if validation.iter().any(LabeledInstance::is_synthetic) {
        return Err(Error::Domain("selection set must hold real instances".into()));
    }
    let n_classifiers = pool.members.len();
    let mut correct = Vec::with_capacity(validation.len() * n_classifiers);
    for inst in &validation {
        for m in &pool.members {
            correct.push(crate::learners::predict_label(m, &inst.x)? == inst.y);
        }
    }
    let index = NeighborIndex::new(validation.iter().map(|i| i.x.clone()).collect());
    Ok(Dsel {
        instances: validation,
        n_classifiers,
        correct,
        index,
    })
}

fn check_pool(pool: &PoolSpec, dsel: &Dsel, x: &[f64]) -> Result<()> {
    if pool.members.len() != dsel.n_classifiers {
        return Err(Error::InvalidPool(alloc::format!(
            "pool has {} members but the selection set was built for {}",
            pool.members.len(),
            dsel.n_classifiers
        )));
    }
    let dim = pool.members[0].feature_dim();
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    Ok(())
}

/// Index of the member with the highest local accuracy; ties go to the
/// lower index.
pub fn dcs_la_select(pool: &PoolSpec, dsel: &Dsel, x: &[f64]) -> Result<usize> {
    check_pool(pool, dsel, x)?;
    let nn = dsel.neighbors(x, pool.k_neighbors)?;
    let mut best = (0usize, 0usize);
    for c in 0..pool.members.len() {
        let hits = nn.iter().filter(|&&i| dsel.correct(i, c)).count();
        if c == 0 || hits > best.1 {
            best = (c, hits);
        }
    }
    Ok(best.0)
}

pub fn dcs_la_predict(pool: &PoolSpec, dsel: &Dsel, x: &[f64]) -> Result<Decision> {
    let c = dcs_la_select(pool, dsel, x)?;
    let m = &pool.members[c];
    Ok(Decision {
        label: m.label(x),
        proba: m.proba(x),
    })
}

/// Members KNORA-E keeps for `x`, or `None` when elimination exhausts every
/// neighbourhood size (the caller then falls back to the full pool).
pub fn knora_e_select(pool: &PoolSpec, dsel: &Dsel, x: &[f64]) -> Result<Option<Vec<usize>>> {
    check_pool(pool, dsel, x)?;
    let nn = dsel.neighbors(x, pool.k_neighbors)?;
    for k in (1..=nn.len()).rev() {
        let chosen: Vec<usize> = (0..pool.members.len())
            .filter(|&c| nn[..k].iter().all(|&i| dsel.correct(i, c)))
            .collect();
        if !chosen.is_empty() {
            return Ok(Some(chosen));
        }
    }
    Ok(None)
}

/// Majority vote; a tie goes up.
fn vote(pool: &PoolSpec, members: &[usize], x: &[f64]) -> Decision {
    let ups = members
        .iter()
        .filter(|&&c| pool.members[c].label(x) == UP)
        .count();
    let proba = ups as f64 / members.len() as f64;
    Decision {
        label: u8::from(2 * ups >= members.len()),
        proba,
    }
}

pub fn knora_e_predict(pool: &PoolSpec, dsel: &Dsel, x: &[f64]) -> Result<Decision> {
    let all: Vec<usize>;
    let chosen = match knora_e_select(pool, dsel, x)? {
        Some(c) => c,
        None => {
            all = (0..pool.members.len()).collect();
            all
        }
    };
    Ok(vote(pool, &chosen, x))
}

/// Stratified split of real training instances into `(fit, dsel)`, with
/// `fraction` of each class going to the selection set.
pub fn split_dsel(
    train: &[LabeledInstance],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledInstance>, Vec<LabeledInstance>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig("selection fraction must be in (0, 1)".into()));
    }
    let mut in_dsel = vec![false; train.len()];
    for class in [0u8, 1u8] {
        let mut idx: Vec<usize> = (0..train.len()).filter(|&i| train[i].y == class).collect();
        let mut rng = Stream::new(seed, &[TAG_DSEL, class as u64]);
        rng.shuffle(&mut idx);
        let take = (fraction * idx.len() as f64 + 0.5) as usize;
        for &i in &idx[..take] {
            in_dsel[i] = true;
        }
    }
    let mut fit = Vec::new();
    let mut dsel = Vec::new();
    for (inst, &d) in train.iter().zip(&in_dsel) {
        if d {
            dsel.push(inst.clone());
        } else {
            fit.push(inst.clone());
        }
    }
    Ok((fit, dsel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{DecisionTree, TreeNode, TreeParams};

    fn constant(up: bool) -> TrainedModel {
        TrainedModel::Tree(DecisionTree {
            params: TreeParams::default(),
            feature_dim: 1,
            nodes: vec![TreeNode::Leaf {
                down: f64::from(u8::from(!up)),
                up: f64::from(u8::from(up)),
            }],
        })
    }

    fn points(labels: &[u8]) -> Vec<LabeledInstance> {
        labels
            .iter()
            .enumerate()
            .map(|(i, &y)| LabeledInstance::observed("A", i as i64, vec![i as f64 / 10.0], y))
            .collect()
    }

    #[test]
    fn correctness_columns() {
        let pool = PoolSpec::new(vec![constant(true), constant(false)]).unwrap();
        let dsel = build_dsel(&pool, points(&[0, 0, 0])).unwrap();
        for i in 0..3 {
            assert!(!dsel.correct(i, 0));
            assert!(dsel.correct(i, 1));
        }
    }

    #[test]
    fn empty_dsel_rejected() {
        let pool = PoolSpec::new(vec![constant(true)]).unwrap();
        assert!(matches!(build_dsel(&pool, Vec::new()), Err(Error::EmptyDsel)));
    }

    #[test]
    fn dcs_ties_go_to_first_member() {
        let pool = PoolSpec::new(vec![constant(true), constant(true)]).unwrap();
        let dsel = build_dsel(&pool, points(&[1, 0, 1, 0, 1, 0, 1, 0])).unwrap();
        assert_eq!(dcs_la_select(&pool, &dsel, &[0.2]).unwrap(), 0);
    }

    #[test]
    fn knora_falls_back_to_full_pool() {
        let pool = PoolSpec::new(vec![constant(true), constant(true), constant(false)]).unwrap();
        let mut labels = vec![0u8; 7];
        labels[0] = 1;
        // Query sits on instance 0 (up): members 0,1 are correct there, so
        // the k = 1 level keeps them.
        let dsel = build_dsel(&pool, points(&labels)).unwrap();
        assert_eq!(knora_e_select(&pool, &dsel, &[0.0]).unwrap(), Some(vec![0, 1]));
        let pool2 = PoolSpec::new(vec![constant(false), constant(false)]).unwrap();
        let dsel2 = build_dsel(&pool2, points(&[1; 7])).unwrap();
        assert_eq!(knora_e_select(&pool2, &dsel2, &[0.0]).unwrap(), None);
        assert_eq!(knora_e_predict(&pool2, &dsel2, &[0.0]).unwrap().label, 0);
    }

    #[test]
    fn k_larger_than_dsel() {
        let pool = PoolSpec::new(vec![constant(true)]).unwrap();
        let dsel = build_dsel(&pool, points(&[1, 0])).unwrap();
        assert!(matches!(
            dcs_la_predict(&pool, &dsel, &[0.0]),
            Err(Error::NeighborhoodTooLarge { k: 7, size: 2 })
        ));
    }
}
