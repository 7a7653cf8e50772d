//! SMOTE oversampling of the minority class.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::features::LabeledInstance;
use crate::math::{ceil, squared_distance};
use crate::rng::Stream;
use crate::{Error, Result};

const TAG_SMOTE: u64 = 0x736d_6f74;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    /// Target minority count as a multiple of the majority count.
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            k_neighbors: 3,
            target_ratio: 1.0,
            seed: 1,
        }
    }
}

/// How one synthetic row was made: indices refer to the input slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub base: usize,
    pub neighbor: usize,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoteOutput {
    /// Originals in input order, then synthetic rows ordered by base index.
    pub instances: Vec<LabeledInstance>,
    /// One entry per synthetic row, aligned with the tail of `instances`.
    pub provenance: Vec<Provenance>,
    pub minority_label: u8,
}

impl SmoteOutput {
    pub fn synthetic(&self) -> &[LabeledInstance] {
        &self.instances[self.instances.len() - self.provenance.len()..]
    }
}

/// `base + u * (neighbor - base)`, clamped per coordinate to the segment's
/// bounding box so rounding can never leave it.
pub fn interpolate(base: &[f64], neighbor: &[f64], u: f64) -> Vec<f64> {
    base.iter()
        .zip(neighbor)
        .map(|(&a, &b)| (a + u * (b - a)).clamp(a.min(b), a.max(b)))
        .collect()
}

/// Indices (into `points`) of the `k` nearest other points to `points[i]`,
/// nearest first, ties to the lower index.
pub fn nearest_neighbors(points: &[&[f64]], i: usize, k: usize) -> Vec<usize> {
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for (j, p) in points.iter().enumerate() {
        if j == i {
            continue;
        }
        let d = squared_distance(points[i], p);
        if best.len() == k && d >= best[k - 1].0 {
            continue;
        }
        let pos = best.partition_point(|&(bd, _)| bd <= d);
        best.insert(pos, (d, j));
        best.truncate(k);
    }
    best.into_iter().map(|(_, j)| j).collect()
}

/// Oversamples the minority class until it holds
/// `ceil(target_ratio * majority)` rows. Synthetic rows are unkeyed.
pub fn smote(train: &[LabeledInstance], config: &SmoteConfig) -> Result<SmoteOutput> {
    if config.k_neighbors == 0 {
        return Err(Error::InvalidConfig("k_neighbors must be at least 1".into()));
    }
    if !(config.target_ratio > 0.0) {
        return Err(Error::InvalidConfig("target_ratio must be positive".into()));
    }
    let ones = train.iter().filter(|i| i.y == 1).count();
    let zeros = train.len() - ones;
    let (minority_label, majority) = if zeros <= ones { (0, ones) } else { (1, zeros) };
    let minority: Vec<usize> = (0..train.len())
        .filter(|&i| train[i].y == minority_label)
        .collect();
    let k = config.k_neighbors;
    if minority.len() < k + 1 {
        return Err(Error::MinorityTooSmall {
            k,
            got: minority.len(),
        });
    }
    let target = ceil(config.target_ratio * majority as f64) as usize;
    let n_new = target.saturating_sub(minority.len());

    let mut rng = Stream::new(config.seed, &[TAG_SMOTE]);
    // Even share per minority row; the remainder goes to randomly chosen rows.
    let m = minority.len();
    let mut per_base = alloc::vec![n_new / m; m];
    let mut order: Vec<usize> = (0..m).collect();
    rng.shuffle(&mut order);
    for &i in &order[..n_new % m] {
        per_base[i] += 1;
    }

    let points: Vec<&[f64]> = minority.iter().map(|&i| train[i].x.as_slice()).collect();
    let mut instances = train.to_vec();
    instances.reserve(n_new);
    let mut provenance = Vec::with_capacity(n_new);
    for (local, &count) in per_base.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let neighbors = nearest_neighbors(&points, local, k);
        for _ in 0..count {
            let nn = neighbors[rng.below(neighbors.len())];
            let u = rng.unit();
            let x = interpolate(points[local], points[nn], u);
            instances.push(LabeledInstance::synthetic(x, minority_label));
            provenance.push(Provenance {
                base: minority[local],
                neighbor: minority[nn],
                u,
            });
        }
    }
    Ok(SmoteOutput {
        instances,
        provenance,
        minority_label,
    })
}
