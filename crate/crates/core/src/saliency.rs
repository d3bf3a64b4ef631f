//! Motion saliency from optical flow under the boundary prior.
//!
//! Two per-pixel distances to the frame border are combined:
//!
//! * **flow dissimilarity**: squared distance from a pixel's flow vector to
//!   the nearest dominant boundary-flow cluster;
//! * **barrier distance**: `max - min` edge weight along the spanning-tree
//!   path to the closest border pixel, where the tree is a minimum spanning
//!   tree of the 4-connected grid weighted by flow differences.
//!
//! Each is rescaled to `[0, 1]` and the two are averaged.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{MbdMode, PipelineConfig};
use crate::error::{check_dims, Error, Result};
use crate::field::{BinaryMask, FlowField, SaliencyField};
use crate::nodes::{NodeLayout, NodeVector};
use crate::superpixel::SuperpixelSegmentation;

/// Border band of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundarySpec {
    band_width: usize,
}

impl BoundarySpec {
    pub fn new(band_width: usize) -> Self {
        Self { band_width }
    }

    pub fn band_width(&self) -> usize {
        self.band_width
    }

    /// Checks `1 <= band_width < min(width, height) / 2`, with the 1-pixel
    /// border always allowed.
    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        let limit = width.min(height);
        if self.band_width == 0 || (self.band_width > 1 && 2 * self.band_width >= limit) {
            return Err(Error::InvalidInput(format!(
                "boundary band {} does not fit a {width}x{height} frame",
                self.band_width
            )));
        }
        Ok(())
    }

    /// Widest valid band not exceeding the requested one.
    pub fn clamped(&self, width: usize, height: usize) -> Self {
        let limit = width.min(height);
        let max = if limit >= 3 { (limit - 1) / 2 } else { 1 };
        Self::new(self.band_width.clamp(1, max.max(1)))
    }

    pub fn contains(&self, x: usize, y: usize, width: usize, height: usize) -> bool {
        let b = self.band_width;
        x < b || y < b || x + b >= width || y + b >= height
    }

    /// Raster indices of the band, ascending.
    pub fn pixels(&self, width: usize, height: usize) -> Vec<usize> {
        (0..width * height)
            .filter(|&p| self.contains(p % width, p / width, width, height))
            .collect()
    }
}

/// Dominant boundary-flow directions.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    pub centers: Vec<[f64; 2]>,
    /// Share of boundary pixels assigned to each retained center.
    pub assignment_fractions: Vec<f64>,
}

const KMEANS_MAX_ITERS: usize = 100;
const KMEANS_TOL: f64 = 1e-6;

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1])
}

fn nearest(point: [f64; 2], centers: &[[f64; 2]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, &c) in centers.iter().enumerate() {
        let d = dist2(point, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations. Seeding stops early
/// when every point coincides with a chosen center; clusters that end up
/// empty are dropped.
pub fn kmeans(points: &[[f64; 2]], k: usize, seed: u64) -> (Vec<[f64; 2]>, Vec<usize>) {
    if points.is_empty() || k == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|&p| dist2(p, centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if !(total > 0.0) {
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = points.len() - 1;
        for (i, &d) in d2.iter().enumerate() {
            if d > 0.0 && target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        while d2[pick] == 0.0 {
            pick -= 1;
        }
        let c = points[pick];
        centers.push(c);
        for (d, &p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, c));
        }
    }

    let mut assignment = vec![0usize; points.len()];
    for _ in 0..KMEANS_MAX_ITERS {
        for (a, &p) in assignment.iter_mut().zip(points) {
            *a = nearest(p, &centers).0;
        }
        let mut sums = vec![[0.0f64; 3]; centers.len()];
        for (&a, &p) in assignment.iter().zip(points) {
            sums[a][0] += p[0];
            sums[a][1] += p[1];
            sums[a][2] += 1.0;
        }
        let mut shift = 0.0f64;
        let mut next = Vec::with_capacity(centers.len());
        for (c, s) in centers.iter().zip(&sums) {
            if s[2] > 0.0 {
                let m = [s[0] / s[2], s[1] / s[2]];
                shift = shift.max(libm::sqrt(dist2(*c, m)));
                next.push(m);
            }
        }
        let dropped = next.len() != centers.len();
        centers = next;
        if !dropped && shift < KMEANS_TOL {
            break;
        }
    }
    for (a, &p) in assignment.iter_mut().zip(points) {
        *a = nearest(p, &centers).0;
    }
    let mut counts = vec![0usize; centers.len()];
    for &a in &assignment {
        counts[a] += 1;
    }
    let keep: Vec<usize> = (0..centers.len()).filter(|&k| counts[k] > 0).collect();
    let centers = keep.iter().map(|&k| centers[k]).collect();
    let counts = keep.iter().map(|&k| counts[k]).collect();
    (centers, counts)
}

/// Clusters the flow vectors of the boundary band and keeps the centers
/// holding at least `min_cluster_fraction` of the band.
pub fn cluster_boundary_flow(
    flow: &FlowField,
    boundary: BoundarySpec,
    k: usize,
    min_cluster_fraction: f64,
    seed: u64,
) -> Result<ClusterSet> {
    let (w, h) = flow.dims();
    boundary.validate(w, h)?;
    if k == 0 {
        return Err(Error::InvalidConfig("cluster count must be >= 1".into()));
    }
    let points: Vec<[f64; 2]> = boundary
        .pixels(w, h)
        .into_iter()
        .map(|p| flow.at(p % w, p / w))
        .collect();
    Ok(cluster_points(&points, k, min_cluster_fraction, seed))
}

pub(crate) fn cluster_points(
    points: &[[f64; 2]],
    k: usize,
    min_cluster_fraction: f64,
    seed: u64,
) -> ClusterSet {
    let (centers, counts) = kmeans(points, k, seed);
    let total = points.len() as f64;
    let mut set = ClusterSet {
        centers: Vec::new(),
        assignment_fractions: Vec::new(),
    };
    for (c, n) in centers.into_iter().zip(counts) {
        let frac = n as f64 / total;
        if frac >= min_cluster_fraction {
            set.centers.push(c);
            set.assignment_fractions.push(frac);
        }
    }
    set
}

/// Squared distance from each pixel's flow to the nearest retained center.
pub fn flow_dissimilarity(flow: &FlowField, clusters: &ClusterSet) -> Result<SaliencyField> {
    if clusters.centers.is_empty() {
        return Err(Error::InvalidInput("cluster set is empty".into()));
    }
    let (w, h) = flow.dims();
    Ok(SaliencyField::from_fn(w, h, |x, y| {
        nearest(flow.at(x, y), &clusters.centers).1
    }))
}

/// Spanning tree over the pixel grid, rooted at `root`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanningTree {
    width: usize,
    height: usize,
    /// Parent pixel; the root is its own parent.
    pub parent: Vec<usize>,
    /// Weight of the edge to the parent (0 at the root).
    pub edge_weight: Vec<f64>,
    pub root: usize,
    /// Pixels in breadth-first order from the root.
    order: Vec<usize>,
}

impl SpanningTree {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn total_weight(&self) -> f64 {
        self.edge_weight.iter().sum()
    }

    /// Breadth-first order from the root; every parent precedes its children.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Undirected tree adjacency in CSR form: `(offsets, (neighbor, weight))`.
    pub fn adjacency(&self) -> (Vec<usize>, Vec<(usize, f64)>) {
        let n = self.parent.len();
        let mut degree = vec![0usize; n + 1];
        for p in 0..n {
            if p != self.root {
                degree[p + 1] += 1;
                degree[self.parent[p] + 1] += 1;
            }
        }
        for i in 0..n {
            degree[i + 1] += degree[i];
        }
        let mut next = degree.clone();
        let mut edges = vec![(0, 0.0); degree[n]];
        for p in 0..n {
            if p != self.root {
                let q = self.parent[p];
                let w = self.edge_weight[p];
                edges[next[p]] = (q, w);
                next[p] += 1;
                edges[next[q]] = (p, w);
                next[q] += 1;
            }
        }
        (degree, edges)
    }
}

/// Dissimilarity of two neighbouring flow vectors: the larger absolute
/// component difference.
pub fn flow_edge_weight(a: [f64; 2], b: [f64; 2]) -> f64 {
    libm::fabs(a[0] - b[0]).max(libm::fabs(a[1] - b[1]))
}

/// Grid edges in `(row, col, direction)` order: for every pixel its right
/// neighbour, then its lower neighbour.
pub fn grid_edges(width: usize, height: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(2 * width * height);
    for y in 0..height {
        for x in 0..width {
            let p = y * width + x;
            if x + 1 < width {
                edges.push((p, p + 1));
            }
            if y + 1 < height {
                edges.push((p, p + width));
            }
        }
    }
    edges
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            core::cmp::Ordering::Less => self.parent[ra] = rb,
            core::cmp::Ordering::Greater => self.parent[rb] = ra,
            core::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Kruskal minimum spanning tree of the 4-connected grid. Ties are broken by
/// grid edge order, so the tree is deterministic. Rooted at pixel 0.
pub fn build_flow_mst(flow: &FlowField) -> SpanningTree {
    let (w, h) = flow.dims();
    let n = w * h;
    let mut edges: Vec<(f64, usize, usize)> = grid_edges(w, h)
        .into_iter()
        .map(|(p, q)| {
            let wt = flow_edge_weight(flow.at(p % w, p / w), flow.at(q % w, q / w));
            (wt, p, q)
        })
        .collect();
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut sets = DisjointSet::new(n);
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut taken = 0;
    for (wt, p, q) in edges {
        if sets.union(p, q) {
            adj[p].push((q, wt));
            adj[q].push((p, wt));
            taken += 1;
            if taken + 1 == n {
                break;
            }
        }
    }

    let root = 0;
    let mut parent = vec![usize::MAX; n];
    let mut edge_weight = vec![0.0; n];
    let mut order = Vec::with_capacity(n);
    parent[root] = root;
    order.push(root);
    let mut head = 0;
    while head < order.len() {
        let p = order[head];
        head += 1;
        for &(q, wt) in &adj[p] {
            if parent[q] == usize::MAX {
                parent[q] = p;
                edge_weight[q] = wt;
                order.push(q);
            }
        }
    }
    SpanningTree {
        width: w,
        height: h,
        parent,
        edge_weight,
        root,
        order,
    }
}

/// Minimum over seeds of the barrier (`max - min` edge weight) along the
/// tree path, evaluated exactly by one traversal per seed. Seeds get 0.
pub fn min_barrier_distance(tree: &SpanningTree, boundary: BoundarySpec) -> Result<SaliencyField> {
    let (w, h) = (tree.width, tree.height);
    boundary.validate(w, h)?;
    let seeds = boundary.pixels(w, h);
    SaliencyField::new(w, h, barrier_from_seeds(tree, &seeds))
}

/// Exact barrier distance for an arbitrary seed set.
pub fn barrier_from_seeds(tree: &SpanningTree, seeds: &[usize]) -> Vec<f64> {
    let n = tree.parent.len();
    let (offsets, edges) = tree.adjacency();
    let mut best = vec![f64::INFINITY; n];
    let mut stack: Vec<(usize, usize, f64, f64)> = Vec::new();
    for &s in seeds {
        best[s] = 0.0;
        stack.push((s, usize::MAX, f64::NEG_INFINITY, f64::INFINITY));
        while let Some((p, from, hi, lo)) = stack.pop() {
            for &(q, wt) in &edges[offsets[p]..offsets[p + 1]] {
                if q == from {
                    continue;
                }
                let (hi, lo) = (hi.max(wt), lo.min(wt));
                let d = hi - lo;
                if d < best[q] {
                    best[q] = d;
                }
                stack.push((q, p, hi, lo));
            }
        }
    }
    best
}

/// Two-sweep approximation of [`barrier_from_seeds`]: a leaves-to-root pass
/// followed by a root-to-leaves pass, each relaxing a node's path bounds
/// through one tree edge.
pub fn barrier_two_pass(tree: &SpanningTree, seeds: &[usize]) -> Vec<f64> {
    let n = tree.parent.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let mut lo = vec![f64::INFINITY; n];
    for &s in seeds {
        dist[s] = 0.0;
    }
    let relax =
        |dist: &mut [f64], hi: &mut [f64], lo: &mut [f64], from: usize, to: usize, wt: f64| {
            if !dist[from].is_finite() {
                return;
            }
            let (h, l) = (hi[from].max(wt), lo[from].min(wt));
            if h - l < dist[to] {
                dist[to] = h - l;
                hi[to] = h;
                lo[to] = l;
            }
        };
    for &p in tree.order.iter().rev() {
        if p != tree.root {
            relax(
                &mut dist,
                &mut hi,
                &mut lo,
                p,
                tree.parent[p],
                tree.edge_weight[p],
            );
        }
    }
    for &p in &tree.order {
        if p != tree.root {
            relax(
                &mut dist,
                &mut hi,
                &mut lo,
                tree.parent[p],
                p,
                tree.edge_weight[p],
            );
        }
    }
    dist
}

/// Saliency terms of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSaliency {
    /// Flow dissimilarity, raw.
    pub dissimilarity: SaliencyField,
    /// Barrier distance, raw.
    pub barrier: SaliencyField,
    /// Mean of the two terms after min-max rescaling; in `[0, 1]`.
    pub combined: SaliencyField,
}

pub fn frame_motion_saliency(flow: &FlowField, config: &PipelineConfig) -> Result<SaliencyField> {
    motion_saliency_terms(flow, config).map(|m| m.combined)
}

pub fn motion_saliency_terms(flow: &FlowField, config: &PipelineConfig) -> Result<MotionSaliency> {
    let (w, h) = flow.dims();
    let band = BoundarySpec::new(config.cluster_band_width).clamped(w, h);
    let clusters = cluster_boundary_flow(
        flow,
        band,
        config.clusters,
        config.min_cluster_fraction,
        config.seed,
    )?;
    let dissimilarity = flow_dissimilarity(flow, &clusters)?;

    let tree = build_flow_mst(flow);
    let seeds = BoundarySpec::new(config.mbd_band_width)
        .clamped(w, h)
        .pixels(w, h);
    let barrier = match config.mbd_mode {
        MbdMode::Exact => barrier_from_seeds(&tree, &seeds),
        MbdMode::Approximate => barrier_two_pass(&tree, &seeds),
    };
    let barrier = SaliencyField::new(w, h, barrier)?;

    let a = dissimilarity.normalize01();
    let b = barrier.normalize01();
    let combined = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| 0.5 * (x + y))
        .collect();
    Ok(MotionSaliency {
        dissimilarity,
        barrier,
        combined: SaliencyField::new(w, h, combined)?,
    })
}

/// Mean of a pixel field over one superpixel.
pub fn superpixel_mean(field: &SaliencyField, pixels: &[usize]) -> f64 {
    if pixels.is_empty() {
        return 0.0;
    }
    pixels.iter().map(|&p| field.values()[p]).sum::<f64>() / pixels.len() as f64
}

/// Averages each frame's saliency over its superpixels, in global id order.
pub fn node_initial_saliency(
    saliency: &[SaliencyField],
    segs: &[SuperpixelSegmentation],
) -> Result<NodeVector> {
    if saliency.len() != segs.len() {
        return Err(Error::LengthMismatch {
            context: "saliency fields vs segmentations",
            expected: segs.len(),
            found: saliency.len(),
        });
    }
    let mut values = Vec::new();
    for (u, seg) in saliency.iter().zip(segs) {
        check_dims("node saliency", seg.dims(), u.dims())?;
        values.extend(
            seg.superpixels()
                .iter()
                .map(|s| superpixel_mean(u, &s.pixels)),
        );
    }
    Ok(NodeVector::new(values))
}

/// Replaces the first frame's entries with the annotated foreground share
/// of each superpixel.
pub fn semi_supervised_init(
    v0: &NodeVector,
    layout: &NodeLayout,
    gt_mask: &BinaryMask,
    seg: &SuperpixelSegmentation,
) -> Result<NodeVector> {
    check_dims("semi-supervised mask", seg.dims(), gt_mask.dims())?;
    if layout.num_frames() == 0 || layout.frame_len(0) != seg.len() {
        return Err(Error::LengthMismatch {
            context: "first-frame superpixels",
            expected: if layout.num_frames() == 0 {
                0
            } else {
                layout.frame_len(0)
            },
            found: seg.len(),
        });
    }
    if v0.len() != layout.num_nodes() {
        return Err(Error::LengthMismatch {
            context: "initial node vector",
            expected: layout.num_nodes(),
            found: v0.len(),
        });
    }
    let mut out = v0.clone();
    for s in seg.superpixels() {
        let fg = s.pixels.iter().filter(|&&p| gt_mask.values()[p]).count();
        out.values_mut()[layout.global(0, s.id)] = fg as f64 / s.size as f64;
    }
    Ok(out)
}
