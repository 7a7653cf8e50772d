use alloc::vec;
use alloc::vec::Vec;

use crate::math::squared_distance;

const LEAF_SIZE: usize = 16;

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Exact k-nearest-neighbour index. Neighbours are ordered by
/// `(squared Euclidean distance, point index)`, which is also the ordering
/// a brute-force scan with a stable sort produces.
pub struct NeighborIndex {
    points: Vec<Vec<f64>>,
    perm: Vec<usize>,
    nodes: Vec<Node>,
    /// Per node bounding box, `lo` and `hi` per dimension.
    boxes: Vec<(Vec<f64>, Vec<f64>)>,
}

impl NeighborIndex {
    pub fn new(points: Vec<Vec<f64>>) -> Self {
        let mut idx = NeighborIndex {
            perm: (0..points.len()).collect(),
            points,
            nodes: Vec::new(),
            boxes: Vec::new(),
        };
        if !idx.points.is_empty() {
            idx.build(0, idx.points.len());
        }
        idx
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    fn bbox(&self, start: usize, end: usize) -> (Vec<f64>, Vec<f64>) {
        let d = self.points[0].len();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for &p in &self.perm[start..end] {
            for (j, &v) in self.points[p].iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        (lo, hi)
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        let (lo, hi) = self.bbox(start, end);
        let widest = (0..lo.len())
            .map(|j| (hi[j] - lo[j], j))
            .fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a });
        self.nodes.push(Node::Leaf { start, end });
        self.boxes.push((lo, hi));
        if end - start <= LEAF_SIZE || widest.0 <= 0.0 {
            return id;
        }
        let dim = widest.1;
        let points = &self.points;
        self.perm[start..end].sort_by(|&a, &b| points[a][dim].total_cmp(&points[b][dim]));
        let mid = start + (end - start) / 2;
        let value = self.points[self.perm[mid]][dim];
        // Everything strictly below `value` goes left, so both sides are
        // non-empty unless the lower half is all equal to `value`.
        let split = self.perm[start..end]
            .iter()
            .position(|&p| self.points[p][dim] >= value)
            .map_or(end, |o| start + o);
        let split = if split == start {
            // Lower half all equal to `value`: split after the run instead.
            self.perm[start..end]
                .iter()
                .position(|&p| self.points[p][dim] > value)
                .map_or(end, |o| start + o)
        } else {
            split
        };
        if split == start || split == end {
            return id;
        }
        let left = self.build(start, split);
        let right = self.build(split, end);
        self.nodes[id] = Node::Split {
            dim,
            value,
            left,
            right,
        };
        id
    }

    fn box_distance(&self, node: usize, x: &[f64]) -> f64 {
        let (lo, hi) = &self.boxes[node];
        x.iter()
            .enumerate()
            .map(|(j, &v)| {
                let d = if v < lo[j] {
                    lo[j] - v
                } else if v > hi[j] {
                    v - hi[j]
                } else {
                    0.0
                };
                d * d
            })
            .sum()
    }

    /// The `k` nearest points as `(index, squared distance)`, nearest first.
    pub fn query(&self, x: &[f64], k: usize) -> Vec<(usize, f64)> {
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            if best.len() == k && self.box_distance(node, x) > best[k - 1].0 {
                continue;
            }
            match &self.nodes[node] {
                Node::Leaf { start, end } => {
                    for &p in &self.perm[*start..*end] {
                        let d = squared_distance(&self.points[p], x);
                        let cand = (d, p);
                        if best.len() == k && !less(cand, best[k - 1]) {
                            continue;
                        }
                        let pos = best.partition_point(|&b| less(b, cand));
                        best.insert(pos, cand);
                        best.truncate(k);
                    }
                }
                Node::Split {
                    dim,
                    value,
                    left,
                    right,
                } => {
                    // Visit the nearer child first.
                    if x[*dim] < *value {
                        stack.push(*right);
                        stack.push(*left);
                    } else {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
        }
        best.into_iter().map(|(d, p)| (p, d)).collect()
    }
}

fn less(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn matches_brute_force_with_duplicates() {
        let mut rng = Stream::new(5, &[]);
        let points: Vec<Vec<f64>> = (0..500)
            .map(|_| {
                (0..3)
                    .map(|_| (rng.below(5) as f64) / 4.0)
                    .collect()
            })
            .collect();
        let index = NeighborIndex::new(points.clone());
        for _ in 0..100 {
            let q: Vec<f64> = (0..3).map(|_| rng.unit()).collect();
            let mut brute: Vec<(f64, usize)> = points
                .iter()
                .enumerate()
                .map(|(i, p)| (squared_distance(p, &q), i))
                .collect();
            brute.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let got: Vec<usize> = index.query(&q, 7).into_iter().map(|(i, _)| i).collect();
            let want: Vec<usize> = brute[..7].iter().map(|&(_, i)| i).collect();
            assert_eq!(got, want);
        }
    }
}
