use alloc::vec::Vec;

use super::Samples;

/// Column-major copy of a sample matrix plus, per feature, the row indices
/// sorted by value (ties by row index). Built once and shared by every tree
/// grown on the same samples.
#[derive(Debug, Clone)]
pub struct ColumnIndex {
    pub(crate) columns: Vec<Vec<f64>>,
    pub(crate) sorted: Vec<Vec<u32>>,
}

impl ColumnIndex {
    pub fn new(samples: &Samples) -> Self {
        let n = samples.len();
        let columns: Vec<Vec<f64>> = (0..samples.dim())
            .map(|f| (0..n).map(|i| samples.value(i, f)).collect())
            .collect();
        let sorted = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        ColumnIndex { columns, sorted }
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-feature sorted orders restricted to rows with nonzero weight.
    pub(crate) fn active_orders(&self, weights: Option<&[u32]>) -> Vec<Vec<u32>> {
        match weights {
            None => self.sorted.clone(),
            Some(w) => self
                .sorted
                .iter()
                .map(|order| order.iter().copied().filter(|&r| w[r as usize] > 0).collect())
                .collect(),
        }
    }
}

/// Midpoint threshold between two consecutive distinct values, nudged down
/// so that `hi` always falls on the right.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

/// Stable partition of every order slice `[lo, hi)` by `goes_left`.
/// Returns the size of the left part.
pub(crate) fn partition_orders(
    orders: &mut [Vec<u32>],
    lo: usize,
    hi: usize,
    goes_left: &[bool],
    scratch: &mut Vec<u32>,
) -> usize {
    let mut n_left = 0;
    for order in orders.iter_mut() {
        scratch.clear();
        let mut write = lo;
        for k in lo..hi {
            let r = order[k];
            if goes_left[r as usize] {
                order[write] = r;
                write += 1;
            } else {
                scratch.push(r);
            }
        }
        n_left = write - lo;
        order[write..hi].copy_from_slice(scratch);
    }
    n_left
}
