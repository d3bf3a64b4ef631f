//! Multi-threaded pipeline stages. Work is split per frame (or per node for
//! the long-range factor) and collected in order, so results do not depend
//! on the thread count.

use std::time::Instant;

use rayon::prelude::*;
use vosprop_core::graph::{visual_row, GraphFactors};
use vosprop_core::pipeline::{
    analyze_frame, assemble_factors, initial_saliency, knn_index, layout_of, proximity_block,
    segment_with, spatial_block, temporal_pair, FrameAnalysis, SegmentationOutput,
};
use vosprop_core::{PipelineConfig, SequenceBundle, SparseMatrix};

use crate::error::{Error, Result};

/// Wall-clock seconds per stage, in execution order.
pub type Timings = Vec<(String, f64)>;

pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Input("--threads must be >= 1".into()));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))
}

fn timed<T>(timings: &mut Timings, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f()?;
    timings.push((stage.into(), start.elapsed().as_secs_f64()));
    Ok(out)
}

pub fn analyze(bundle: &SequenceBundle, config: &PipelineConfig) -> Result<Vec<FrameAnalysis>> {
    config.validate()?;
    if bundle.len() < 2 {
        return Err(Error::Input("a sequence needs at least two frames".into()));
    }
    Ok((0..bundle.len())
        .into_par_iter()
        .map(|i| analyze_frame(bundle, i, config))
        .collect::<Result<Vec<_>, _>>()?)
}

fn visual_factor(analyses: &[FrameAnalysis], config: &PipelineConfig) -> Result<SparseMatrix> {
    let index = knn_index(analyses, config)?;
    let rows = (0..index.len())
        .into_par_iter()
        .map_init(
            || index.searcher(),
            |searcher, id| {
                visual_row(
                    searcher,
                    id,
                    config.knn_k,
                    config.temporal_window,
                    config.sigma,
                )
            },
        )
        .collect::<Result<Vec<_>, _>>()?;
    let triplets: Vec<_> = rows
        .into_iter()
        .enumerate()
        .flat_map(|(i, row)| row.into_iter().map(move |(j, w)| (i, j, w)))
        .collect();
    Ok(SparseMatrix::from_triplets(
        index.len(),
        index.len(),
        triplets,
    )?)
}

pub fn build_factors(
    bundle: &SequenceBundle,
    analyses: &[FrameAnalysis],
    config: &PipelineConfig,
) -> Result<GraphFactors> {
    let f = analyses.len();
    let temporal = if config.factors.temporal {
        (0..f.saturating_sub(1))
            .into_par_iter()
            .map(|i| temporal_pair(bundle, analyses, i, config))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };
    let spatial = if config.factors.spatial {
        analyses
            .par_iter()
            .map(|a| spatial_block(a, config))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };
    let proximity: Vec<_> = analyses
        .par_iter()
        .map(|a| proximity_block(a, config))
        .collect();
    let visual = if config.factors.long_range {
        Some(visual_factor(analyses, config)?)
    } else {
        None
    };
    Ok(assemble_factors(
        &layout_of(analyses),
        &temporal,
        &spatial,
        &proximity,
        visual,
        config,
    )?)
}

pub struct Segmentation {
    pub analyses: Vec<FrameAnalysis>,
    pub factors: GraphFactors,
    pub output: SegmentationOutput,
    pub timings: Timings,
}

/// Full segmentation on the current rayon pool.
pub fn segment(bundle: &SequenceBundle, config: &PipelineConfig) -> Result<Segmentation> {
    let mut timings = Timings::new();
    let analyses = timed(&mut timings, "frames", || analyze(bundle, config))?;
    let factors = timed(&mut timings, "graph", || {
        build_factors(bundle, &analyses, config)
    })?;
    let initial = timed(&mut timings, "initialization", || {
        Ok(initial_saliency(bundle, &analyses, config)?)
    })?;
    segment_initialized(analyses, factors, initial, config, timings)
}

/// Diffusion and binarization from a given initialization, which callers
/// may have altered.
pub fn segment_initialized(
    analyses: Vec<FrameAnalysis>,
    factors: GraphFactors,
    initial: vosprop_core::NodeVector,
    config: &PipelineConfig,
    mut timings: Timings,
) -> Result<Segmentation> {
    if initial.len() != layout_of(&analyses).num_nodes() {
        return Err(Error::Input(
            "initialization does not match the node layout".into(),
        ));
    }
    let output = timed(&mut timings, "diffusion", || {
        Ok(segment_with(&analyses, &factors, initial, config)?)
    })?;
    Ok(Segmentation {
        analyses,
        factors,
        output,
        timings,
    })
}
