//! End-to-end segmentation of one sequence, split into stages so callers can
//! schedule the per-frame work themselves or alter intermediate results.

use alloc::vec::Vec;

use crate::config::PipelineConfig;
use crate::descriptor::{describe_frame, Descriptor};
use crate::diffusion::{binarize, propagate, DiffusionResult};
use crate::edges::fallback_edge_map;
use crate::error::{Error, Result};
use crate::field::{BinaryMask, SaliencyField};
use crate::graph::{
    assemble_intra, assemble_temporal, edge_confidence, proximity_pairs, spatial_adjacency,
    temporal_block, visual_adjacency, GraphFactors,
};
use crate::knn::KnnIndex;
use crate::nodes::{NodeLayout, NodeVector};
use crate::saliency::{frame_motion_saliency, node_initial_saliency, semi_supervised_init};
use crate::sequence::SequenceBundle;
use crate::sparse::SparseMatrix;
use crate::superpixel::{default_superpixel_count, slic, SlicParams, SuperpixelSegmentation};

/// Everything computed from a single frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameAnalysis {
    pub segmentation: SuperpixelSegmentation,
    /// Pixel motion saliency in `[0, 1]`.
    pub saliency: SaliencyField,
    pub descriptors: Vec<Descriptor>,
    /// Per-superpixel edge-free score.
    pub edge_confidence: Vec<f64>,
}

pub fn slic_params(config: &PipelineConfig, width: usize, height: usize) -> SlicParams {
    SlicParams {
        target_count: config
            .superpixel_count
            .unwrap_or_else(|| default_superpixel_count(width, height))
            .min(width * height),
        compactness: config.slic_compactness,
        iterations: config.slic_iterations,
    }
}

pub fn analyze_frame(
    bundle: &SequenceBundle,
    i: usize,
    config: &PipelineConfig,
) -> Result<FrameAnalysis> {
    let frame = bundle.frames().get(i).ok_or(Error::InvalidNode {
        id: i,
        len: bundle.len(),
    })?;
    let (w, h) = frame.dims();
    let segmentation = slic(frame, &slic_params(config, w, h))?;
    let saliency = frame_motion_saliency(&bundle.saliency_flow(i)?, config)?;
    let descriptors = describe_frame(frame, &segmentation);
    let edges = match bundle.edge_maps() {
        Some(maps) => maps[i].clone(),
        None => fallback_edge_map(frame),
    };
    let edge_confidence = edge_confidence(&segmentation, &edges, config.sigma_w, config.epsilon)?;
    Ok(FrameAnalysis {
        segmentation,
        saliency,
        descriptors,
        edge_confidence,
    })
}

pub fn layout_of(analyses: &[FrameAnalysis]) -> NodeLayout {
    NodeLayout::from_counts(analyses.iter().map(|a| a.segmentation.len()))
}

/// Temporal links between frames `i` and `i + 1`, in local ids.
pub fn temporal_pair(
    bundle: &SequenceBundle,
    analyses: &[FrameAnalysis],
    i: usize,
    config: &PipelineConfig,
) -> Result<Vec<(usize, usize, f64)>> {
    temporal_block(
        &analyses[i].segmentation,
        &analyses[i + 1].segmentation,
        &bundle.forward_flow()[i],
        &bundle.backward_flow()[i],
        config.sigma2,
    )
}

/// Spatial links of one frame, in local ids.
pub fn spatial_block(
    analysis: &FrameAnalysis,
    config: &PipelineConfig,
) -> Result<Vec<(usize, usize, f64)>> {
    spatial_adjacency(
        &analysis.segmentation,
        &analysis.edge_confidence,
        config.proximity_factor,
    )
}

/// Spatial neighbourhood pattern of one frame (unit weights, both
/// directions), in local ids.
pub fn proximity_block(
    analysis: &FrameAnalysis,
    config: &PipelineConfig,
) -> Vec<(usize, usize, f64)> {
    proximity_pairs(&analysis.segmentation, config.proximity_factor)
        .into_iter()
        .flat_map(|(k, m)| [(k, m, 1.0), (m, k, 1.0)])
        .collect()
}

pub fn knn_index(analyses: &[FrameAnalysis], config: &PipelineConfig) -> Result<KnnIndex> {
    let descriptors: Vec<Descriptor> = analyses
        .iter()
        .flat_map(|a| a.descriptors.iter().copied())
        .collect();
    KnnIndex::from_descriptors(
        &descriptors,
        layout_of(analyses).frame_ids(),
        config.knn,
        config.seed,
    )
}

/// Assembles precomputed blocks; blocks of disabled factors are ignored and
/// may be empty.
pub fn assemble_factors(
    layout: &NodeLayout,
    temporal: &[Vec<(usize, usize, f64)>],
    spatial: &[Vec<(usize, usize, f64)>],
    proximity: &[Vec<(usize, usize, f64)>],
    visual: Option<SparseMatrix>,
    config: &PipelineConfig,
) -> Result<GraphFactors> {
    let toggles = config.factors;
    let factors = GraphFactors {
        num_nodes: layout.num_nodes(),
        temporal: if toggles.temporal {
            Some(assemble_temporal(layout, temporal)?)
        } else {
            None
        },
        spatial: if toggles.spatial {
            Some(assemble_intra(layout, spatial)?)
        } else {
            None
        },
        visual: if toggles.long_range {
            Some(visual.ok_or_else(|| Error::InvalidInput("long-range factor missing".into()))?)
        } else {
            None
        },
        proximity: assemble_intra(layout, proximity)?,
    };
    factors.validate()?;
    Ok(factors)
}

/// Builds the enabled factors sequentially.
pub fn build_factors(
    bundle: &SequenceBundle,
    analyses: &[FrameAnalysis],
    config: &PipelineConfig,
) -> Result<GraphFactors> {
    let layout = layout_of(analyses);
    let temporal = if config.factors.temporal {
        (0..analyses.len().saturating_sub(1))
            .map(|i| temporal_pair(bundle, analyses, i, config))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let spatial = if config.factors.spatial {
        analyses
            .iter()
            .map(|a| spatial_block(a, config))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let proximity: Vec<_> = analyses
        .iter()
        .map(|a| proximity_block(a, config))
        .collect();
    let visual = if config.factors.long_range {
        let index = knn_index(analyses, config)?;
        Some(visual_adjacency(
            &index,
            config.knn_k,
            config.temporal_window,
            config.sigma,
        )?)
    } else {
        None
    };
    assemble_factors(&layout, &temporal, &spatial, &proximity, visual, config)
}

/// Superpixel averages of the motion saliency, with the first frame taken
/// from its annotation in semi-supervised mode.
pub fn initial_saliency(
    bundle: &SequenceBundle,
    analyses: &[FrameAnalysis],
    config: &PipelineConfig,
) -> Result<NodeVector> {
    let fields: Vec<SaliencyField> = analyses.iter().map(|a| a.saliency.clone()).collect();
    let segs: Vec<SuperpixelSegmentation> =
        analyses.iter().map(|a| a.segmentation.clone()).collect();
    let v0 = node_initial_saliency(&fields, &segs)?;
    if !config.semi_supervised {
        return Ok(v0);
    }
    let gt = bundle
        .annotations()
        .and_then(|a| a.first())
        .ok_or_else(|| {
            Error::InvalidInput("semi-supervised mode needs a first-frame annotation".into())
        })?;
    semi_supervised_init(&v0, &layout_of(analyses), gt, &analyses[0].segmentation)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationOutput {
    pub layout: NodeLayout,
    pub initial: NodeVector,
    pub diffusion: DiffusionResult,
    pub masks: Vec<BinaryMask>,
}

/// Diffusion and binarization from given factors and initialization.
pub fn segment_with(
    analyses: &[FrameAnalysis],
    factors: &GraphFactors,
    initial: NodeVector,
    config: &PipelineConfig,
) -> Result<SegmentationOutput> {
    let diffusion = propagate(factors, &initial, config)?;
    let segs: Vec<SuperpixelSegmentation> =
        analyses.iter().map(|a| a.segmentation.clone()).collect();
    let masks = binarize(&diffusion.node_saliency, &segs, config.binarize_threshold)?;
    Ok(SegmentationOutput {
        layout: layout_of(analyses),
        initial,
        diffusion,
        masks,
    })
}

pub fn analyze_sequence(
    bundle: &SequenceBundle,
    config: &PipelineConfig,
) -> Result<Vec<FrameAnalysis>> {
    config.validate()?;
    (0..bundle.len())
        .map(|i| analyze_frame(bundle, i, config))
        .collect()
}

/// Full single-threaded run.
pub fn run(bundle: &SequenceBundle, config: &PipelineConfig) -> Result<SegmentationOutput> {
    let analyses = analyze_sequence(bundle, config)?;
    let factors = build_factors(bundle, &analyses, config)?;
    let initial = initial_saliency(bundle, &analyses, config)?;
    segment_with(&analyses, &factors, initial, config)
}
