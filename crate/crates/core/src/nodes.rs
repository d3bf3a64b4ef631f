//! Global superpixel numbering across a video.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Per-node scalar, indexed by global superpixel id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeVector(Vec<f64>);

impl NodeVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(alloc::vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    /// Population standard deviation.
    pub fn std_dev(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        let mean = self.mean();
        let var = self.0.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / self.0.len() as f64;
        libm::sqrt(var)
    }
}

/// Frames are concatenated in temporal order: global id = frame offset +
/// local superpixel label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeLayout {
    offsets: Vec<usize>,
}

impl NodeLayout {
    pub fn from_counts(counts: impl IntoIterator<Item = usize>) -> Self {
        let mut offsets = alloc::vec![0];
        for c in counts {
            let last = *offsets.last().expect("nonempty");
            offsets.push(last + c);
        }
        Self { offsets }
    }

    pub fn num_frames(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_nodes(&self) -> usize {
        *self.offsets.last().expect("nonempty")
    }

    pub fn frame_len(&self, frame: usize) -> usize {
        self.offsets[frame + 1] - self.offsets[frame]
    }

    pub fn offset(&self, frame: usize) -> usize {
        self.offsets[frame]
    }

    pub fn global(&self, frame: usize, local: usize) -> usize {
        debug_assert!(local < self.frame_len(frame));
        self.offsets[frame] + local
    }

    pub fn frame_range(&self, frame: usize) -> core::ops::Range<usize> {
        self.offsets[frame]..self.offsets[frame + 1]
    }

    /// Frame index of a global id.
    pub fn frame_of(&self, id: usize) -> Result<usize> {
        if id >= self.num_nodes() {
            return Err(Error::InvalidNode {
                id,
                len: self.num_nodes(),
            });
        }
        Ok(self.offsets.partition_point(|&o| o <= id) - 1)
    }

    /// Frame index for every node, in id order.
    pub fn frame_ids(&self) -> Vec<usize> {
        (0..self.num_frames())
            .flat_map(|f| core::iter::repeat_n(f, self.frame_len(f)))
            .collect()
    }
}
