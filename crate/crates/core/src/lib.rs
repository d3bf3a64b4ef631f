//! Unsupervised video object segmentation by saliency diffusion.
//!
//! Per frame, motion saliency is estimated from optical flow: flow that
//! differs from the dominant flow along the image border, combined with the
//! minimum barrier distance to the border on a flow spanning tree. The
//! per-superpixel saliency is then diffused over a graph linking superpixels
//! through flow (across frames), proximity (within a frame) and appearance
//! (long range), and thresholded into masks.
//!
//! The crate is `no_std` (with `alloc`); enable `std` for
//! `std::error::Error` integration through the error type.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
// Range checks are written `!(x >= lo)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod config;
pub mod descriptor;
pub mod diffusion;
pub mod edges;
pub mod error;
pub mod field;
pub mod graph;
pub mod knn;
pub mod metrics;
pub mod nodes;
pub mod pipeline;
pub mod saliency;
pub mod sequence;
pub mod sparse;
pub mod superpixel;

pub use config::{FactorToggles, KnnParams, MbdMode, PipelineConfig};
pub use error::{Error, Result};
pub use field::{normalize01, BinaryMask, FlowDirection, FlowField, Frame, SaliencyField};
pub use nodes::{NodeLayout, NodeVector};
pub use sequence::SequenceBundle;
pub use sparse::{row_normalize, sparse_matmul, sparse_matvec, SparseMatrix};
pub use superpixel::{Superpixel, SuperpixelSegmentation};
