//! Approximate nearest neighbours with a randomized k-d forest.
//!
//! Each tree splits on a dimension drawn at random among the few with the
//! highest variance, at the mean of that dimension. Queries descend every
//! tree and then explore the remaining branches best-first through one
//! priority queue shared by all trees, until the candidate budget is spent.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::KnnParams;
use crate::descriptor::{squared_distance, Descriptor, DESCRIPTOR_LEN};
use crate::error::{Error, Result};

const TOP_VARIANCE_DIMS: usize = 5;
const VARIANCE_SAMPLE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    /// Squared Euclidean distance.
    pub dist: f64,
}

#[derive(Debug, Clone)]
enum Node {
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        start: usize,
        end: usize,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
    points: Vec<usize>,
}

/// Point set with frame indices, searchable with a temporal window.
#[derive(Debug, Clone)]
pub struct KnnIndex {
    dim: usize,
    data: Vec<f64>,
    frames: Vec<usize>,
    /// `frame_prefix[f]` = number of points with frame `< f`.
    frame_prefix: Vec<usize>,
    trees: Vec<Tree>,
    params: KnnParams,
}

impl KnnIndex {
    /// `data` holds `frames.len()` points of `dim` coordinates, row-major.
    pub fn new(
        dim: usize,
        data: Vec<f64>,
        frames: Vec<usize>,
        params: KnnParams,
        seed: u64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("point dimension must be >= 1".into()));
        }
        crate::error::check_len("knn points", frames.len() * dim, data.len())?;
        if params.trees == 0 || params.leaf_size == 0 {
            return Err(Error::InvalidConfig(
                "knn trees and leaf_size must be >= 1".into(),
            ));
        }
        let last = frames.iter().copied().max().unwrap_or(0);
        let mut frame_prefix = alloc::vec![0usize; last + 2];
        for &f in &frames {
            frame_prefix[f + 1] += 1;
        }
        for f in 1..frame_prefix.len() {
            frame_prefix[f] += frame_prefix[f - 1];
        }
        let mut index = Self {
            dim,
            data,
            frames,
            frame_prefix,
            trees: Vec::new(),
            params,
        };
        if !params.exact {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            index.trees = (0..params.trees)
                .map(|_| index.build_tree(&mut rng))
                .collect();
        }
        Ok(index)
    }

    pub fn from_descriptors(
        descriptors: &[Descriptor],
        frames: Vec<usize>,
        params: KnnParams,
        seed: u64,
    ) -> Result<Self> {
        let data = descriptors.iter().flat_map(|d| d.0).collect();
        Self::new(DESCRIPTOR_LEN, data, frames, params, seed)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, id: usize) -> &[f64] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub fn frame(&self, id: usize) -> usize {
        self.frames[id]
    }

    pub fn params(&self) -> &KnnParams {
        &self.params
    }

    fn build_tree(&self, rng: &mut ChaCha8Rng) -> Tree {
        let mut points: Vec<usize> = (0..self.len()).collect();
        points.shuffle(rng);
        let mut nodes = Vec::new();
        if points.is_empty() {
            nodes.push(Node::Leaf { start: 0, end: 0 });
            return Tree { nodes, points };
        }
        // (node slot, start, end)
        nodes.push(Node::Leaf { start: 0, end: 0 });
        let mut stack = alloc::vec![(0usize, 0usize, points.len())];
        while let Some((slot, start, end)) = stack.pop() {
            let split = if end - start > self.params.leaf_size {
                self.choose_split(&mut points[start..end], rng)
            } else {
                None
            };
            match split {
                None => nodes[slot] = Node::Leaf { start, end },
                Some((dim, value, mid)) => {
                    let left = nodes.len();
                    nodes.push(Node::Leaf { start, end: start });
                    let right = nodes.len();
                    nodes.push(Node::Leaf { start, end: start });
                    nodes[slot] = Node::Split {
                        dim,
                        value,
                        left,
                        right,
                    };
                    stack.push((right, start + mid, end));
                    stack.push((left, start, start + mid));
                }
            }
        }
        Tree { nodes, points }
    }

    /// Partitions `ids` in place; returns (dim, value, size of left part).
    fn choose_split(&self, ids: &mut [usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64, usize)> {
        let sample = &ids[..ids.len().min(VARIANCE_SAMPLE)];
        let n = sample.len() as f64;
        let mut mean = alloc::vec![0.0; self.dim];
        for &i in sample {
            for (m, x) in mean.iter_mut().zip(self.point(i)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = alloc::vec![0.0; self.dim];
        for &i in sample {
            for ((v, m), x) in var.iter_mut().zip(&mean).zip(self.point(i)) {
                *v += (x - m) * (x - m);
            }
        }
        let mut dims: Vec<usize> = (0..self.dim).collect();
        dims.sort_by(|&a, &b| var[b].total_cmp(&var[a]).then(a.cmp(&b)));
        let top = TOP_VARIANCE_DIMS.min(self.dim);
        let dim = dims[rng.random_range(0..top)];
        let value = mean[dim];

        let mut mid = partition(ids, |i| self.point(i)[dim] < value);
        if mid > 0 && mid < ids.len() {
            return Some((dim, value, mid));
        }
        // Mean split degenerated: fall back to the median of the widest
        // dimension over the whole node.
        let (dim, extent) = (0..self.dim)
            .map(|d| {
                let (lo, hi) =
                    ids.iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                            let x = self.point(i)[d];
                            (lo.min(x), hi.max(x))
                        });
                (d, hi - lo)
            })
            .fold((0, 0.0), |best, c| if c.1 > best.1 { c } else { best });
        if extent <= 0.0 {
            return None;
        }
        ids.sort_by(|&a, &b| {
            self.point(a)[dim]
                .total_cmp(&self.point(b)[dim])
                .then(a.cmp(&b))
        });
        mid = ids.len() / 2;
        let value = self.point(ids[mid])[dim];
        // Left holds values <= value, right holds values >= value.
        Some((dim, value, mid))
    }

    /// Approximate (or exact, per the index parameters) `k` nearest
    /// neighbours of point `id` among points whose frame differs from its
    /// own by at most `window`. The point itself is excluded. Results are
    /// sorted by distance, then id.
    pub fn query(&self, id: usize, k: usize, window: usize) -> Result<Vec<Neighbor>> {
        self.searcher().query(id, k, window)
    }

    /// Reusable per-thread search state.
    pub fn searcher(&self) -> Searcher<'_> {
        Searcher {
            index: self,
            stamps: alloc::vec![0; self.len()],
            generation: 0,
        }
    }

    /// Reference search by linear scan.
    pub fn query_exact(&self, id: usize, k: usize, window: usize) -> Result<Vec<Neighbor>> {
        self.check_id(id)?;
        let q = self.point(id);
        let mut out: Vec<Neighbor> = (0..self.len())
            .filter(|&j| self.eligible(id, j, window))
            .map(|j| Neighbor {
                id: j,
                dist: squared_distance(q, self.point(j)),
            })
            .collect();
        if k == 0 {
            return Ok(Vec::new());
        }
        if out.len() > k {
            out.select_nth_unstable_by(k - 1, cmp_neighbor);
            out.truncate(k);
        }
        out.sort_by(cmp_neighbor);
        Ok(out)
    }

    fn check_id(&self, id: usize) -> Result<()> {
        if id >= self.len() {
            return Err(Error::InvalidNode {
                id,
                len: self.len(),
            });
        }
        Ok(())
    }

    /// Number of points a query may return, the query itself excluded.
    fn eligible_count(&self, query: usize, window: usize) -> usize {
        let f = self.frames[query];
        let hi = f.saturating_add(window).min(self.frame_prefix.len() - 2);
        self.frame_prefix[hi + 1] - self.frame_prefix[f.saturating_sub(window)] - 1
    }

    fn eligible(&self, query: usize, j: usize, window: usize) -> bool {
        j != query && self.frames[j].abs_diff(self.frames[query]) <= window
    }
}

fn partition(ids: &mut [usize], mut pred: impl FnMut(usize) -> bool) -> usize {
    let mut mid = 0;
    for i in 0..ids.len() {
        if pred(ids[i]) {
            ids.swap(i, mid);
            mid += 1;
        }
    }
    mid
}

fn cmp_neighbor(a: &Neighbor, b: &Neighbor) -> Ordering {
    a.dist.total_cmp(&b.dist).then(a.id.cmp(&b.id))
}

#[derive(Debug, Clone, Copy)]
struct Branch {
    bound: f64,
    tree: usize,
    node: usize,
}

impl PartialEq for Branch {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Branch {}

impl PartialOrd for Branch {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Branch {
    // Reversed so the max-heap pops the smallest bound first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(other.tree.cmp(&self.tree))
            .then(other.node.cmp(&self.node))
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate(Neighbor);

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_neighbor(&self.0, &other.0)
    }
}

pub struct Searcher<'a> {
    index: &'a KnnIndex,
    stamps: Vec<u32>,
    generation: u32,
}

struct QueryState<'q> {
    query: usize,
    point: &'q [f64],
    k: usize,
    window: usize,
    checked: usize,
    best: BinaryHeap<Candidate>,
}

impl QueryState<'_> {
    fn worst(&self) -> f64 {
        if self.best.len() < self.k {
            f64::INFINITY
        } else {
            self.best.peek().map_or(f64::INFINITY, |c| c.0.dist)
        }
    }
}

impl Searcher<'_> {
    /// Falls back to a linear scan when the index is exact or the check
    /// budget covers every eligible point.
    pub fn query(&mut self, id: usize, k: usize, window: usize) -> Result<Vec<Neighbor>> {
        let index = self.index;
        index.check_id(id)?;
        if index.params.exact || index.eligible_count(id, window) <= index.params.checks {
            return index.query_exact(id, k, window);
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamps.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
        let mut state = QueryState {
            query: id,
            point: index.point(id),
            k,
            window,
            checked: 0,
            best: BinaryHeap::with_capacity(k + 1),
        };
        let mut branches = BinaryHeap::new();
        for tree in 0..index.trees.len() {
            self.descend(tree, 0, 0.0, &mut state, &mut branches);
        }
        while let Some(b) = branches.pop() {
            if state.best.len() == k && state.checked >= index.params.checks {
                break;
            }
            if b.bound > state.worst() {
                break;
            }
            self.descend(b.tree, b.node, b.bound, &mut state, &mut branches);
        }
        let mut out: Vec<Neighbor> = state.best.into_iter().map(|c| c.0).collect();
        out.sort_by(cmp_neighbor);
        Ok(out)
    }

    fn descend(
        &mut self,
        tree: usize,
        mut node: usize,
        bound: f64,
        state: &mut QueryState<'_>,
        branches: &mut BinaryHeap<Branch>,
    ) {
        let index = self.index;
        let t = &index.trees[tree];
        loop {
            match t.nodes[node] {
                Node::Split {
                    dim,
                    value,
                    left,
                    right,
                } => {
                    let diff = state.point[dim] - value;
                    let (near, far) = if diff < 0.0 {
                        (left, right)
                    } else {
                        (right, left)
                    };
                    branches.push(Branch {
                        bound: bound + diff * diff,
                        tree,
                        node: far,
                    });
                    node = near;
                }
                Node::Leaf { start, end } => {
                    for &j in &t.points[start..end] {
                        if self.stamps[j] == self.generation {
                            continue;
                        }
                        self.stamps[j] = self.generation;
                        if !index.eligible(state.query, j, state.window) {
                            continue;
                        }
                        state.checked += 1;
                        let dist = squared_distance(state.point, index.point(j));
                        let cand = Candidate(Neighbor { id: j, dist });
                        if state.best.len() < state.k {
                            state.best.push(cand);
                        } else if state.best.peek().is_some_and(|w| cand < *w) {
                            state.best.pop();
                            state.best.push(cand);
                        }
                    }
                    return;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> KnnIndex {
        let data = (0..n).map(|i| i as f64).collect();
        KnnIndex::new(1, data, alloc::vec![0; n], KnnParams::default(), 3).unwrap()
    }

    #[test]
    fn nearest_on_a_line() {
        let idx = line(100);
        let r = idx.query(50, 2, 0).unwrap();
        assert_eq!(
            r.iter().map(|n| n.id).collect::<Vec<_>>(),
            alloc::vec![49, 51]
        );
        assert_eq!(r[0].dist, 1.0);
    }

    #[test]
    fn duplicate_comes_first() {
        let data = alloc::vec![0.0, 0.0, 5.0, 0.0, 0.0, 0.0];
        let idx = KnnIndex::new(2, data, alloc::vec![0, 0, 0], KnnParams::default(), 0).unwrap();
        let r = idx.query(0, 1, 0).unwrap();
        assert_eq!(r[0].id, 2);
        assert_eq!(r[0].dist, 0.0);
    }

    #[test]
    fn window_filters_frames() {
        let data = (0..6).map(|i| i as f64).collect();
        let frames = alloc::vec![0, 0, 1, 1, 2, 2];
        let idx = KnnIndex::new(1, data, frames, KnnParams::default(), 0).unwrap();
        let r = idx.query(0, 10, 0).unwrap();
        assert_eq!(r.len(), 1);
        let r = idx.query(0, 10, 1).unwrap();
        assert!(r.iter().all(|n| idx.frame(n.id) <= 1));
        assert_eq!(r.len(), 3);
    }

    #[test]
    fn all_identical_points() {
        let idx = KnnIndex::new(
            2,
            alloc::vec![1.0; 200],
            alloc::vec![0; 100],
            KnnParams::default(),
            0,
        )
        .unwrap();
        let r = idx.query(7, 5, 0).unwrap();
        assert_eq!(r.len(), 5);
        assert!(r.iter().all(|n| n.dist == 0.0 && n.id != 7));
    }
}
