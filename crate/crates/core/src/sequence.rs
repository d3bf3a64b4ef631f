//! A video with its flow, optional edge maps and optional annotations.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{check_dims, Error, Result};
use crate::field::{BinaryMask, FlowDirection, FlowField, Frame, SaliencyField};

/// Validated inputs of one sequence.
///
/// `forward_flow[i]` maps frame `i` to `i + 1`; `backward_flow[i]` maps
/// frame `i + 1` back to `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBundle {
    frames: Vec<Frame>,
    forward_flow: Vec<FlowField>,
    backward_flow: Vec<FlowField>,
    edge_maps: Option<Vec<SaliencyField>>,
    annotations: Option<Vec<BinaryMask>>,
}

fn count_check(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::InvalidInput(format!(
            "expected {expected} {what}, found {found}"
        )));
    }
    Ok(())
}

impl SequenceBundle {
    pub fn new(
        frames: Vec<Frame>,
        forward_flow: Vec<FlowField>,
        backward_flow: Vec<FlowField>,
        edge_maps: Option<Vec<SaliencyField>>,
        annotations: Option<Vec<BinaryMask>>,
    ) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::InvalidInput("sequence has no frames".into()))?;
        let dims = first.dims();
        let n = frames.len();
        for f in &frames {
            check_dims("frame", dims, f.dims())?;
        }
        count_check("forward flow fields", n - 1, forward_flow.len())?;
        count_check("backward flow fields", n - 1, backward_flow.len())?;
        for f in &forward_flow {
            check_dims("forward flow", dims, f.dims())?;
            if f.direction() != FlowDirection::Forward {
                return Err(Error::InvalidInput(
                    "forward list holds a backward field".into(),
                ));
            }
        }
        for f in &backward_flow {
            check_dims("backward flow", dims, f.dims())?;
            if f.direction() != FlowDirection::Backward {
                return Err(Error::InvalidInput(
                    "backward list holds a forward field".into(),
                ));
            }
        }
        if let Some(edges) = &edge_maps {
            count_check("edge maps", n, edges.len())?;
            for e in edges {
                check_dims("edge map", dims, e.dims())?;
                if e.values().iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::InvalidInput("edge map value outside [0, 1]".into()));
                }
            }
        }
        if let Some(masks) = &annotations {
            count_check("annotations", n, masks.len())?;
            for m in masks {
                check_dims("annotation", dims, m.dims())?;
            }
        }
        Ok(Self {
            frames,
            forward_flow,
            backward_flow,
            edge_maps,
            annotations,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn forward_flow(&self) -> &[FlowField] {
        &self.forward_flow
    }

    pub fn backward_flow(&self) -> &[FlowField] {
        &self.backward_flow
    }

    pub fn edge_maps(&self) -> Option<&[SaliencyField]> {
        self.edge_maps.as_deref()
    }

    pub fn annotations(&self) -> Option<&[BinaryMask]> {
        self.annotations.as_deref()
    }

    pub fn with_edge_maps(self, edge_maps: Option<Vec<SaliencyField>>) -> Result<Self> {
        Self::new(
            self.frames,
            self.forward_flow,
            self.backward_flow,
            edge_maps,
            self.annotations,
        )
    }

    pub fn with_annotations(self, annotations: Option<Vec<BinaryMask>>) -> Result<Self> {
        Self::new(
            self.frames,
            self.forward_flow,
            self.backward_flow,
            self.edge_maps,
            annotations,
        )
    }

    /// Flow that drives frame `i`'s motion saliency: its forward flow, or
    /// for the last frame the negated backward flow into the previous one.
    pub fn saliency_flow(&self, i: usize) -> Result<FlowField> {
        if self.len() < 2 {
            return Err(Error::InvalidInput(
                "motion saliency needs at least two frames".into(),
            ));
        }
        if i >= self.len() {
            return Err(Error::InvalidNode {
                id: i,
                len: self.len(),
            });
        }
        Ok(if i + 1 < self.len() {
            self.forward_flow[i].clone()
        } else {
            self.backward_flow[i - 1].negated()
        })
    }
}
