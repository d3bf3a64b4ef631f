//! Saliency propagation over the video graph and mask extraction.

use alloc::vec::Vec;

use crate::config::PipelineConfig;
use crate::error::{check_len, Error, Result};
use crate::field::{normalize01_in_place, BinaryMask};
use crate::graph::{FactoredGraph, GraphFactors};
use crate::nodes::NodeVector;
use crate::sparse::SparseMatrix;
use crate::superpixel::SuperpixelSegmentation;

/// Anything that maps a node vector `v` to `G v`.
pub trait Propagator {
    fn num_nodes(&self) -> usize;
    fn step(&self, v: &[f64]) -> Result<Vec<f64>>;
}

impl Propagator for SparseMatrix {
    fn num_nodes(&self) -> usize {
        self.n_rows()
    }

    fn step(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.matvec(v)
    }
}

impl Propagator for FactoredGraph {
    fn num_nodes(&self) -> usize {
        FactoredGraph::num_nodes(self)
    }

    fn step(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.apply(v)
    }
}

/// `G^iterations v0`.
pub fn diffuse<P: Propagator + ?Sized>(
    g: &P,
    v0: &NodeVector,
    iterations: usize,
) -> Result<NodeVector> {
    check_len("diffusion input", g.num_nodes(), v0.len())?;
    let mut v = v0.values().to_vec();
    for _ in 0..iterations {
        v = g.step(&v)?;
    }
    Ok(NodeVector::new(v))
}

/// Nodes with `v >= mean + alpha * std` (the core) and the core plus its
/// spatial neighbours in `proximity` (the focus set), both sorted. A constant
/// vector selects every node as core; a non-finite threshold selects none.
pub fn focus_regions(
    v: &NodeVector,
    alpha: f64,
    proximity: &SparseMatrix,
) -> Result<(Vec<usize>, Vec<usize>)> {
    check_len("focus proximity", v.len(), proximity.n_rows())?;
    if v.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    if v.min() == v.max() {
        let all: Vec<usize> = (0..v.len()).collect();
        return Ok((all.clone(), all));
    }
    let tau = v.mean() + alpha * v.std_dev();
    if !tau.is_finite() {
        return Ok((Vec::new(), Vec::new()));
    }
    let mut selected = alloc::vec![false; v.len()];
    let mut core = Vec::new();
    for (i, &x) in v.values().iter().enumerate() {
        if x >= tau {
            core.push(i);
            selected[i] = true;
            for (j, _) in proximity.row(i) {
                selected[j] = true;
            }
        }
    }
    let focus = selected
        .iter()
        .enumerate()
        .filter_map(|(i, &s)| s.then_some(i))
        .collect();
    Ok((core, focus))
}

/// The focus set of [`focus_regions`].
pub fn focus_set(v: &NodeVector, alpha: f64, proximity: &SparseMatrix) -> Result<Vec<usize>> {
    Ok(focus_regions(v, alpha, proximity)?.1)
}

/// Second diffusion restricted to the focus set.
#[derive(Debug, Clone, PartialEq)]
pub struct FocusedOutcome {
    pub values: NodeVector,
    /// Nodes whose re-diffused value was kept; empty when the pass was skipped.
    pub core: Vec<usize>,
    /// Nodes of the sub-graph (core plus ring).
    pub focus: Vec<usize>,
}

/// Re-diffuses `v` on the sub-graph induced by its focus set. Core nodes take
/// their re-diffused value; ring and outside nodes are scaled by
/// `focus_gamma`. An empty focus set returns `v`.
pub fn focused_diffusion(
    factors: &GraphFactors,
    v: &NodeVector,
    config: &PipelineConfig,
) -> Result<FocusedOutcome> {
    check_len("focused diffusion input", factors.num_nodes, v.len())?;
    let (core, focus) = focus_regions(v, config.focus_alpha, &factors.proximity)?;
    if focus.is_empty() {
        return Ok(FocusedOutcome {
            values: v.clone(),
            core,
            focus,
        });
    }
    let sub = factors.restrict(&focus).stochastic()?;
    let sub_v = NodeVector::new(focus.iter().map(|&i| v.values()[i]).collect());
    let sub_v = diffuse(&sub, &sub_v, config.diffusion_iters)?;

    let mut out: Vec<f64> = v.values().iter().map(|x| x * config.focus_gamma).collect();
    let mut c = core.iter().peekable();
    for (&i, &x) in focus.iter().zip(sub_v.values()) {
        if c.next_if_eq(&&i).is_some() {
            out[i] = x;
        }
    }
    Ok(FocusedOutcome {
        values: NodeVector::new(out),
        core,
        focus,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionResult {
    pub node_saliency: NodeVector,
    pub first_pass: NodeVector,
    /// Nodes of the focused pass; empty if it did not run.
    pub focus: Vec<usize>,
}

/// Plain diffusion followed, if enabled, by the focused pass.
pub fn propagate(
    factors: &GraphFactors,
    v0: &NodeVector,
    config: &PipelineConfig,
) -> Result<DiffusionResult> {
    let g = factors.stochastic()?;
    let first_pass = diffuse(&g, v0, config.diffusion_iters)?;
    let (node_saliency, focus) = if config.focused_diffusion {
        let f = focused_diffusion(factors, &first_pass, config)?;
        (f.values, f.focus)
    } else {
        (first_pass.clone(), Vec::new())
    };
    Ok(DiffusionResult {
        node_saliency,
        first_pass,
        focus,
    })
}

/// Rescales `v` to `[0, 1]` over the whole video and thresholds each
/// frame's superpixels. A constant `v` is thresholded as is.
pub fn binarize(
    v: &NodeVector,
    segs: &[SuperpixelSegmentation],
    threshold: f64,
) -> Result<Vec<BinaryMask>> {
    let total: usize = segs.iter().map(|s| s.len()).sum();
    check_len("binarize input", total, v.len())?;
    if v.values().iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite node saliency".into()));
    }
    let mut values = v.values().to_vec();
    if v.min() != v.max() {
        normalize01_in_place(&mut values);
    }
    let mut masks = Vec::with_capacity(segs.len());
    let mut offset = 0;
    for seg in segs {
        let (w, h) = seg.dims();
        let fg: Vec<bool> = values[offset..offset + seg.len()]
            .iter()
            .map(|&x| x >= threshold)
            .collect();
        let pixels = seg.labels().iter().map(|&l| fg[l as usize]).collect();
        masks.push(BinaryMask::new(w, h, pixels)?);
        offset += seg.len();
    }
    Ok(masks)
}
