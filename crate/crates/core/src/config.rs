//! Pipeline parameters.

use alloc::format;

use crate::error::{Error, Result};

/// How the minimum barrier distance is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbdMode {
    /// Per-seed tree traversal; reference results.
    Exact,
    /// Two sweeps over the spanning tree (leaves to root, root to leaves).
    Approximate,
}

/// Which adjacency factors enter the composed diffusion graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FactorToggles {
    pub temporal: bool,
    pub spatial: bool,
    pub long_range: bool,
}

impl FactorToggles {
    pub const ALL: Self = Self {
        temporal: true,
        spatial: true,
        long_range: true,
    };
    pub const NONE: Self = Self {
        temporal: false,
        spatial: false,
        long_range: false,
    };
}

impl Default for FactorToggles {
    fn default() -> Self {
        Self::ALL
    }
}

/// Randomized k-d forest parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnParams {
    pub trees: usize,
    pub leaf_size: usize,
    /// Minimum number of candidate points examined per query before the
    /// search may stop.
    pub checks: usize,
    /// Linear scan instead of the forest.
    pub exact: bool,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self {
            trees: 8,
            leaf_size: 16,
            checks: 6000,
            exact: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Boundary flow clusters.
    pub clusters: usize,
    /// Clusters holding a smaller share of the boundary pixels are dropped.
    pub min_cluster_fraction: f64,
    /// Band width (pixels) of the boundary used for flow clustering.
    pub cluster_band_width: usize,
    /// Band width (pixels) of the boundary seeds for the barrier distance.
    pub mbd_band_width: usize,
    pub mbd_mode: MbdMode,

    /// `None` picks [`crate::superpixel::default_superpixel_count`].
    pub superpixel_count: Option<usize>,
    pub slic_compactness: f64,
    pub slic_iterations: usize,

    /// Neighbours per node in the long-range factor.
    pub knn_k: usize,
    /// Temporal window (frames) for long-range neighbours.
    pub temporal_window: usize,
    pub knn: KnnParams,
    /// Visual similarity bandwidth.
    pub sigma: f64,
    /// Flow consistency bandwidth.
    pub sigma2: f64,
    /// Edge decay slope.
    pub sigma_w: f64,
    /// Edge decay offset.
    pub epsilon: f64,
    /// Spatial neighbours: centroid distance below this multiple of the
    /// square root of the mean superpixel size.
    pub proximity_factor: f64,

    pub diffusion_iters: usize,
    pub factors: FactorToggles,
    pub focused_diffusion: bool,
    /// Focus threshold is `mean + focus_alpha * std` of the first pass.
    pub focus_alpha: f64,
    /// Scale applied to nodes outside the focus core.
    pub focus_gamma: f64,
    pub binarize_threshold: f64,

    /// Replace the first frame's initialization with its annotation.
    pub semi_supervised: bool,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            clusters: 3,
            min_cluster_fraction: 1.0 / 6.0,
            cluster_band_width: 10,
            mbd_band_width: 1,
            mbd_mode: MbdMode::Exact,
            superpixel_count: None,
            slic_compactness: 10.0,
            slic_iterations: 10,
            knn_k: 40,
            temporal_window: 15,
            knn: KnnParams::default(),
            sigma: 0.1,
            sigma2: 1.0 / 64.0,
            sigma_w: 50.0,
            epsilon: 0.05,
            proximity_factor: 1.5,
            diffusion_iters: 25,
            factors: FactorToggles::ALL,
            focused_diffusion: true,
            focus_alpha: 1.0,
            focus_gamma: 0.5,
            binarize_threshold: 0.5,
            semi_supervised: false,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: alloc::string::String| Err(Error::InvalidConfig(msg));
        if self.clusters == 0 {
            return fail("clusters must be >= 1".into());
        }
        if !(self.min_cluster_fraction >= 0.0)
            || self.min_cluster_fraction > 1.0 / self.clusters as f64
        {
            return fail(format!(
                "min_cluster_fraction {} must lie in [0, 1/clusters]",
                self.min_cluster_fraction
            ));
        }
        for (name, v) in [
            ("sigma", self.sigma),
            ("sigma2", self.sigma2),
            ("sigma_w", self.sigma_w),
            ("proximity_factor", self.proximity_factor),
            ("slic_compactness", self.slic_compactness),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return fail(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !self.epsilon.is_finite() {
            return fail("epsilon must be finite".into());
        }
        if self.diffusion_iters == 0 {
            return fail("diffusion_iters must be >= 1".into());
        }
        if self.cluster_band_width == 0 || self.mbd_band_width == 0 {
            return fail("boundary band widths must be >= 1".into());
        }
        if self.superpixel_count == Some(0) {
            return fail("superpixel_count must be >= 1".into());
        }
        if self.slic_iterations == 0 {
            return fail("slic_iterations must be >= 1".into());
        }
        if self.knn.trees == 0 || self.knn.leaf_size == 0 {
            return fail("knn trees and leaf_size must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.binarize_threshold) {
            return fail("binarize_threshold must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.focus_gamma) {
            return fail("focus_gamma must lie in [0, 1]".into());
        }
        if self.focus_alpha.is_nan() {
            return fail("focus_alpha must not be NaN".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!(c.sigma2, 2f64.powi(-6));
    }

    #[test]
    fn rejects_fraction_above_inverse_k() {
        let c = PipelineConfig {
            clusters: 4,
            min_cluster_fraction: 0.3,
            ..PipelineConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn rejects_nonpositive_sigma() {
        let c = PipelineConfig {
            sigma: 0.0,
            ..PipelineConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
