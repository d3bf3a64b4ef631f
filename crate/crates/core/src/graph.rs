//! Adjacency factors over all superpixels of a video and their composition.
//!
//! * temporal: flow-linked superpixels of consecutive frames, weighted by
//!   forward/backward consistency;
//! * spatial: nearby superpixels of one frame, weighted by how free of image
//!   edges they are;
//! * visual: nearest neighbours in descriptor space within a temporal window.
//!
//! Each factor gets unit self-loops and is row-normalized; the diffusion
//! operator is the product of the three.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{check_dims, check_len, Error, Result};
use crate::field::{FlowField, SaliencyField};
use crate::knn::{KnnIndex, Searcher};
use crate::nodes::NodeLayout;
use crate::sparse::SparseMatrix;
use crate::superpixel::SuperpixelSegmentation;

/// Per-pixel agreement between a flow field and the reverse flow found at
/// the displaced position.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceField {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl ConfidenceField {
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `false` where the displaced position leaves the image.
    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// `exp(-|f(p) + r(p + f(p))|^2 / sigma2)`, with `r` sampled bilinearly;
/// zero (and invalid) where `p + f(p)` falls outside the image.
pub fn flow_consistency_confidence(
    flow: &FlowField,
    reverse: &FlowField,
    sigma2: f64,
) -> Result<ConfidenceField> {
    check_dims("reverse flow", flow.dims(), reverse.dims())?;
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidConfig("sigma2 must be positive".into()));
    }
    let (w, h) = flow.dims();
    let mut values = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let f = flow.at(x, y);
            match reverse.sample_bilinear(x as f64 + f[0], y as f64 + f[1]) {
                Some(r) => {
                    let du = f[0] + r[0];
                    let dv = f[1] + r[1];
                    values.push(libm::exp(-(du * du + dv * dv) / sigma2));
                    valid.push(true);
                }
                None => {
                    values.push(0.0);
                    valid.push(false);
                }
            }
        }
    }
    Ok(ConfidenceField {
        width: w,
        height: h,
        values,
        valid,
    })
}

/// Label of the pixel nearest to `(x, y) + d`, if inside the segmentation.
fn displaced_label(seg: &SuperpixelSegmentation, x: usize, y: usize, d: [f64; 2]) -> Option<usize> {
    let (w, h) = seg.dims();
    let tx = libm::round(x as f64 + d[0]);
    let ty = libm::round(y as f64 + d[1]);
    if tx < 0.0 || ty < 0.0 || tx >= w as f64 || ty >= h as f64 {
        return None;
    }
    Some(seg.label_at(tx as usize, ty as usize))
}

/// Temporal links between frame `i` (`seg`) and frame `i + 1` (`next`), as
/// `(local id in i, local id in i + 1, weight)` sorted by ids.
///
/// `forward` maps frame `i` to `i + 1`, `backward` maps `i + 1` to `i`;
/// `conf_forward` / `conf_backward` are their consistency confidences.
pub fn temporal_adjacency(
    seg: &SuperpixelSegmentation,
    next: &SuperpixelSegmentation,
    forward: &FlowField,
    backward: &FlowField,
    conf_forward: &ConfidenceField,
    conf_backward: &ConfidenceField,
) -> Result<Vec<(usize, usize, f64)>> {
    let dims = seg.dims();
    check_dims("next segmentation", dims, next.dims())?;
    check_dims("forward flow", dims, forward.dims())?;
    check_dims("backward flow", dims, backward.dims())?;
    check_dims("forward confidence", dims, conf_forward.dims())?;
    check_dims("backward confidence", dims, conf_backward.dims())?;
    let (w, h) = dims;
    let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for y in 0..h {
        for x in 0..w {
            let c = conf_forward.at(x, y);
            if c > 0.0 {
                if let Some(m) = displaced_label(next, x, y, forward.at(x, y)) {
                    *acc.entry((seg.label_at(x, y), m)).or_insert(0.0) += c;
                }
            }
            let c = conf_backward.at(x, y);
            if c > 0.0 {
                if let Some(k) = displaced_label(seg, x, y, backward.at(x, y)) {
                    *acc.entry((k, next.label_at(x, y))).or_insert(0.0) += c;
                }
            }
        }
    }
    let sizes = seg.superpixels();
    let next_sizes = next.superpixels();
    Ok(acc
        .into_iter()
        .map(|((k, m), s)| (k, m, s / (sizes[k].size + next_sizes[m].size) as f64))
        .collect())
}

/// [`temporal_adjacency`] with both confidences computed from the flows.
pub fn temporal_block(
    seg: &SuperpixelSegmentation,
    next: &SuperpixelSegmentation,
    forward: &FlowField,
    backward: &FlowField,
    sigma2: f64,
) -> Result<Vec<(usize, usize, f64)>> {
    let cf = flow_consistency_confidence(forward, backward, sigma2)?;
    let cb = flow_consistency_confidence(backward, forward, sigma2)?;
    temporal_adjacency(seg, next, forward, backward, &cf, &cb)
}

/// Mean over each superpixel of `1 / (1 + exp(sigma_w * (edge - epsilon)))`:
/// close to 1 for superpixels without edges, close to 0 on strong edges.
pub fn edge_confidence(
    seg: &SuperpixelSegmentation,
    edge_map: &SaliencyField,
    sigma_w: f64,
    epsilon: f64,
) -> Result<Vec<f64>> {
    check_dims("edge map", seg.dims(), edge_map.dims())?;
    let g = edge_map.values();
    Ok(seg
        .superpixels()
        .iter()
        .map(|s| {
            s.pixels
                .iter()
                .map(|&p| 1.0 / (1.0 + libm::exp(sigma_w * (g[p] - epsilon))))
                .sum::<f64>()
                / s.size as f64
        })
        .collect())
}

/// Unordered pairs `(k, m)`, `k < m`, whose centroids are closer than
/// `factor * sqrt((|s_k| + |s_m|) / 2)`.
pub fn proximity_pairs(seg: &SuperpixelSegmentation, factor: f64) -> Vec<(usize, usize)> {
    let sps = seg.superpixels();
    let mut out = Vec::new();
    for (k, a) in sps.iter().enumerate() {
        for (m, b) in sps.iter().enumerate().skip(k + 1) {
            let dx = a.centroid.0 - b.centroid.0;
            let dy = a.centroid.1 - b.centroid.1;
            let reach = factor * libm::sqrt((a.size + b.size) as f64 / 2.0);
            if dx * dx + dy * dy < reach * reach {
                out.push((k, m));
            }
        }
    }
    out
}

/// Symmetric intra-frame links `(k, m, (A_k + A_m) / 2)` between nearby
/// superpixels, both directions, sorted.
pub fn spatial_adjacency(
    seg: &SuperpixelSegmentation,
    a: &[f64],
    proximity_factor: f64,
) -> Result<Vec<(usize, usize, f64)>> {
    check_len("edge confidences", seg.len(), a.len())?;
    let mut out = Vec::new();
    for (k, m) in proximity_pairs(seg, proximity_factor) {
        let w = 0.5 * (a[k] + a[m]);
        out.push((k, m, w));
        out.push((m, k, w));
    }
    out.sort_by_key(|x| (x.0, x.1));
    Ok(out)
}

/// Outgoing visual links of one node: `exp(-d / sigma)` for each of its
/// `k` nearest neighbours within `window` frames.
pub fn visual_row(
    searcher: &mut Searcher<'_>,
    id: usize,
    k: usize,
    window: usize,
    sigma: f64,
) -> Result<Vec<(usize, f64)>> {
    Ok(searcher
        .query(id, k, window)?
        .into_iter()
        .map(|n| (n.id, libm::exp(-n.dist / sigma)))
        .collect())
}

/// Directed k-nearest-neighbour similarity matrix over all indexed nodes.
pub fn visual_adjacency(
    index: &KnnIndex,
    k: usize,
    window: usize,
    sigma: f64,
) -> Result<SparseMatrix> {
    let mut searcher = index.searcher();
    let mut triplets = Vec::new();
    for id in 0..index.len() {
        for (j, w) in visual_row(&mut searcher, id, k, window, sigma)? {
            triplets.push((id, j, w));
        }
    }
    SparseMatrix::from_triplets(index.len(), index.len(), triplets)
}

/// Places per-frame-pair temporal blocks (`blocks[i]` links frames `i` and
/// `i + 1`) into a global symmetric matrix.
pub fn assemble_temporal(
    layout: &NodeLayout,
    blocks: &[Vec<(usize, usize, f64)>],
) -> Result<SparseMatrix> {
    let n = layout.num_nodes();
    check_len(
        "temporal blocks",
        layout.num_frames().saturating_sub(1),
        blocks.len(),
    )?;
    let mut triplets = Vec::new();
    for (i, block) in blocks.iter().enumerate() {
        for &(k, m, w) in block {
            check_local(layout, i, k)?;
            check_local(layout, i + 1, m)?;
            let a = layout.global(i, k);
            let b = layout.global(i + 1, m);
            triplets.push((a, b, w));
            triplets.push((b, a, w));
        }
    }
    SparseMatrix::from_triplets(n, n, triplets)
}

/// Places per-frame intra-frame blocks into a global matrix.
pub fn assemble_intra(
    layout: &NodeLayout,
    blocks: &[Vec<(usize, usize, f64)>],
) -> Result<SparseMatrix> {
    let n = layout.num_nodes();
    check_len("intra-frame blocks", layout.num_frames(), blocks.len())?;
    let mut triplets = Vec::new();
    for (f, block) in blocks.iter().enumerate() {
        for &(k, m, w) in block {
            check_local(layout, f, k)?;
            check_local(layout, f, m)?;
            triplets.push((layout.global(f, k), layout.global(f, m), w));
        }
    }
    SparseMatrix::from_triplets(n, n, triplets)
}

fn check_local(layout: &NodeLayout, frame: usize, local: usize) -> Result<()> {
    if local >= layout.frame_len(frame) {
        return Err(Error::InvalidNode {
            id: local,
            len: layout.frame_len(frame),
        });
    }
    Ok(())
}

/// `rownorm(T + I) * rownorm(E + I) * rownorm(V + I)`.
pub fn compose_graph(t: &SparseMatrix, e: &SparseMatrix, v: &SparseMatrix) -> Result<SparseMatrix> {
    let a = t.plus_identity()?.row_normalize();
    let b = e.plus_identity()?.row_normalize();
    let c = v.plus_identity()?.row_normalize();
    a.matmul(&b)?.matmul(&c)
}

/// The three factors of a video graph; a disabled factor is `None` and acts
/// as the identity. `proximity` is the spatial neighbourhood pattern, kept
/// even when the spatial factor is disabled.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFactors {
    pub num_nodes: usize,
    pub temporal: Option<SparseMatrix>,
    pub spatial: Option<SparseMatrix>,
    pub visual: Option<SparseMatrix>,
    pub proximity: SparseMatrix,
}

impl GraphFactors {
    pub fn validate(&self) -> Result<()> {
        let n = self.num_nodes;
        for m in [&self.temporal, &self.spatial, &self.visual]
            .into_iter()
            .flatten()
            .chain([&self.proximity])
        {
            check_dims("graph factor", (n, n), (m.n_rows(), m.n_cols()))?;
        }
        Ok(())
    }

    /// Row-stochastic factors, applied right to left.
    pub fn stochastic(&self) -> Result<FactoredGraph> {
        self.validate()?;
        let mut factors = Vec::new();
        for m in [&self.temporal, &self.spatial, &self.visual]
            .into_iter()
            .flatten()
        {
            factors.push(m.plus_identity()?.row_normalize());
        }
        Ok(FactoredGraph {
            num_nodes: self.num_nodes,
            factors,
        })
    }

    /// Explicit product matrix.
    pub fn compose(&self) -> Result<SparseMatrix> {
        self.stochastic()?.compose()
    }

    /// Sub-graph on `nodes` (sorted, unique); node `nodes[i]` becomes `i`.
    pub fn restrict(&self, nodes: &[usize]) -> Self {
        Self {
            num_nodes: nodes.len(),
            temporal: self.temporal.as_ref().map(|m| m.restrict(nodes)),
            spatial: self.spatial.as_ref().map(|m| m.restrict(nodes)),
            visual: self.visual.as_ref().map(|m| m.restrict(nodes)),
            proximity: self.proximity.restrict(nodes),
        }
    }
}

/// A product of row-stochastic matrices kept in factored form.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredGraph {
    num_nodes: usize,
    factors: Vec<SparseMatrix>,
}

impl FactoredGraph {
    pub fn new(num_nodes: usize, factors: Vec<SparseMatrix>) -> Result<Self> {
        for m in &factors {
            check_dims(
                "graph factor",
                (num_nodes, num_nodes),
                (m.n_rows(), m.n_cols()),
            )?;
        }
        Ok(Self { num_nodes, factors })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn factors(&self) -> &[SparseMatrix] {
        &self.factors
    }

    /// `G v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("node vector", self.num_nodes, v.len())?;
        let mut out = v.to_vec();
        for m in self.factors.iter().rev() {
            out = m.matvec(&out)?;
        }
        Ok(out)
    }

    pub fn compose(&self) -> Result<SparseMatrix> {
        let mut g = SparseMatrix::identity(self.num_nodes);
        for m in &self.factors {
            g = g.matmul(m)?;
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FlowDirection;

    #[test]
    fn consistent_flow_has_unit_confidence() {
        let f = FlowField::constant(8, 8, FlowDirection::Forward, [1.0, 0.0]).unwrap();
        let b = FlowField::constant(8, 8, FlowDirection::Backward, [-1.0, 0.0]).unwrap();
        let c = flow_consistency_confidence(&f, &b, 1.0 / 64.0).unwrap();
        assert_eq!(c.at(3, 3), 1.0);
        // Last column moves out of the image.
        assert_eq!(c.at(7, 3), 0.0);
        assert!(!c.valid()[3 * 8 + 7]);
    }

    #[test]
    fn confidence_at_sigma2_residual() {
        let sigma2 = 1.0 / 64.0;
        let f = FlowField::constant(4, 4, FlowDirection::Forward, [0.0, 0.0]).unwrap();
        let r = FlowField::constant(4, 4, FlowDirection::Backward, [0.125, 0.0]).unwrap();
        let c = flow_consistency_confidence(&f, &r, sigma2).unwrap();
        assert!((c.at(1, 1) - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn whole_frame_superpixels_link_with_weight_one() {
        let seg = SuperpixelSegmentation::grid(6, 5, 1, 1).unwrap();
        let f = FlowField::constant(6, 5, FlowDirection::Forward, [0.0, 0.0]).unwrap();
        let b = FlowField::constant(6, 5, FlowDirection::Backward, [0.0, 0.0]).unwrap();
        let t = temporal_block(&seg, &seg, &f, &b, 1.0 / 64.0).unwrap();
        assert_eq!(t, alloc::vec![(0, 0, 1.0)]);
    }

    #[test]
    fn edge_confidence_values() {
        let seg = SuperpixelSegmentation::grid(4, 4, 1, 1).unwrap();
        let at = |v: f64| {
            let e = SaliencyField::new(4, 4, alloc::vec![v; 16]).unwrap();
            edge_confidence(&seg, &e, 50.0, 0.05).unwrap()[0]
        };
        assert!((at(0.05) - 0.5).abs() < 1e-12);
        assert!((at(0.0) - 1.0 / (1.0 + (-2.5f64).exp())).abs() < 1e-12);
        assert!(at(1.0) < 1e-20);
    }

    #[test]
    fn tiling_neighbourhood() {
        let seg = SuperpixelSegmentation::grid(64, 64, 4, 4).unwrap();
        let pairs = proximity_pairs(&seg, 1.5);
        // Interior tile (1,1) = id 5 reaches its 8 surrounding tiles.
        let n5 = pairs.iter().filter(|&&(a, b)| a == 5 || b == 5).count();
        assert_eq!(n5, 8);
        assert!(!pairs.contains(&(0, 2)));
    }

    #[test]
    fn empty_factors_compose_to_identity() {
        let z = SparseMatrix::zeros(3, 3);
        assert_eq!(
            compose_graph(&z, &z, &z).unwrap(),
            SparseMatrix::identity(3)
        );
    }

    #[test]
    fn factored_apply_matches_product() {
        let t = SparseMatrix::from_triplets(3, 3, alloc::vec![(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let v = SparseMatrix::from_triplets(3, 3, alloc::vec![(1, 2, 0.5), (2, 0, 2.0)]).unwrap();
        let factors = GraphFactors {
            num_nodes: 3,
            temporal: Some(t),
            spatial: None,
            visual: Some(v),
            proximity: SparseMatrix::zeros(3, 3),
        };
        let g = factors.compose().unwrap();
        let x = [0.2, 0.7, 1.0];
        let a = g.matvec(&x).unwrap();
        let b = factors.stochastic().unwrap().apply(&x).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }
    }
}
