//! Dense per-pixel containers: frames, flow fields, scalar maps and masks.
//!
//! All fields are stored row-major, index `y * width + x`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};

/// An RGB video frame with channel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    index: usize,
    rgb: Vec<[f32; 3]>,
}

impl Frame {
    pub fn new(width: usize, height: usize, index: usize, rgb: Vec<[f32; 3]>) -> Result<Self> {
        check_nonempty(width, height)?;
        check_len("frame pixels", width * height, rgb.len())?;
        if let Some(p) = rgb
            .iter()
            .position(|c| c.iter().any(|v| !(0.0..=1.0).contains(v)))
        {
            return Err(Error::InvalidInput(format!(
                "frame {index}: pixel {p} has a channel outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            index,
            rgb,
        })
    }

    pub fn uniform(width: usize, height: usize, index: usize, color: [f32; 3]) -> Result<Self> {
        Self::new(width, height, index, vec![color; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn rgb(&self) -> &[[f32; 3]] {
        &self.rgb
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        self.rgb[y * self.width + x]
    }
}

/// Which neighbouring frame a flow field points to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowDirection {
    /// Frame `i` to frame `i + 1`.
    Forward,
    /// Frame `i` to frame `i - 1`.
    Backward,
}

/// Dense optical flow, one `(u, v)` displacement per pixel in pixels/frame.
///
/// Vectors are kept in single precision, matching the `.flo` interchange
/// format, so a read/write round trip is lossless.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    direction: FlowDirection,
    vectors: Vec<[f32; 2]>,
}

impl FlowField {
    pub fn new(
        width: usize,
        height: usize,
        direction: FlowDirection,
        vectors: Vec<[f32; 2]>,
    ) -> Result<Self> {
        check_nonempty(width, height)?;
        check_len("flow vectors", width * height, vectors.len())?;
        if let Some(p) = vectors
            .iter()
            .position(|v| !v[0].is_finite() || !v[1].is_finite())
        {
            return Err(Error::InvalidInput(format!(
                "flow vector at pixel {p} is not finite"
            )));
        }
        Ok(Self {
            width,
            height,
            direction,
            vectors,
        })
    }

    pub fn constant(
        width: usize,
        height: usize,
        direction: FlowDirection,
        v: [f32; 2],
    ) -> Result<Self> {
        Self::new(width, height, direction, vec![v; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn direction(&self) -> FlowDirection {
        self.direction
    }

    pub fn vectors(&self) -> &[[f32; 2]] {
        &self.vectors
    }

    pub fn at(&self, x: usize, y: usize) -> [f64; 2] {
        let v = self.vectors[y * self.width + x];
        [f64::from(v[0]), f64::from(v[1])]
    }

    /// Every vector negated, with the direction flipped.
    pub fn negated(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            direction: match self.direction {
                FlowDirection::Forward => FlowDirection::Backward,
                FlowDirection::Backward => FlowDirection::Forward,
            },
            vectors: self.vectors.iter().map(|v| [-v[0], -v[1]]).collect(),
        }
    }

    /// Bilinear sample at a sub-pixel position; `None` outside
    /// `[0, width - 1] x [0, height - 1]`.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<[f64; 2]> {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        if !(0.0..=max_x).contains(&x) || !(0.0..=max_y).contains(&y) {
            return None;
        }
        let x0 = libm::floor(x) as usize;
        let y0 = libm::floor(y) as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate() {
            let a = self.at(x0, y0)[c] * (1.0 - fx) + self.at(x1, y0)[c] * fx;
            let b = self.at(x0, y1)[c] * (1.0 - fx) + self.at(x1, y1)[c] * fx;
            *o = a * (1.0 - fy) + b * fy;
        }
        Some(out)
    }
}

/// A per-pixel scalar map (motion saliency, edge response, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SaliencyField {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_nonempty(width, height)?;
        check_len("saliency values", width * height, values.len())?;
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Min-max rescaling to `[0, 1]`; see [`normalize01_in_place`].
    pub fn normalize01(&self) -> Self {
        let mut out = self.clone();
        normalize01_in_place(&mut out.values);
        out
    }
}

/// Rescales values affinely so the minimum maps to 0 and the maximum to 1.
///
/// A constant input carries no contrast and maps to all zeros.
pub fn normalize01_in_place(values: &mut [f64]) {
    let (lo, hi) = min_max(values);
    let span = hi - lo;
    if !(span > 0.0) {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    for v in values.iter_mut() {
        *v = ((*v - lo) / span).clamp(0.0, 1.0);
    }
}

pub fn normalize01(field: &SaliencyField) -> SaliencyField {
    field.normalize01()
}

pub(crate) fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

/// Binary segmentation mask, `true` = foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    values: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, values: Vec<bool>) -> Result<Self> {
        check_nonempty(width, height)?;
        check_len("mask pixels", width * height, values.len())?;
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.values[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.values[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&v| v).count()
    }
}

fn check_nonempty(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidInput(format!(
            "field dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_affine() {
        let f = SaliencyField::new(3, 1, vec![2.0, 4.0, 6.0]).unwrap();
        assert_eq!(f.normalize01().values(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn normalize_constant_is_zero() {
        let f = SaliencyField::new(3, 1, vec![5.0; 3]).unwrap();
        assert_eq!(f.normalize01().values(), &[0.0; 3]);
    }

    #[test]
    fn normalize_idempotent_on_unit_span() {
        let f = SaliencyField::new(3, 1, vec![0.0, 0.3, 1.0]).unwrap();
        assert_eq!(f.normalize01().values(), f.values());
    }

    #[test]
    fn frame_rejects_out_of_range() {
        assert!(Frame::new(1, 1, 0, vec![[0.0, 1.5, 0.0]]).is_err());
        assert!(Frame::new(0, 1, 0, vec![]).is_err());
    }

    #[test]
    fn flow_rejects_non_finite() {
        let r = FlowField::new(1, 1, FlowDirection::Forward, vec![[f32::NAN, 0.0]]);
        assert!(r.is_err());
    }

    #[test]
    fn bilinear_sampling() {
        let f = FlowField::new(
            2,
            2,
            FlowDirection::Forward,
            vec![[0.0, 0.0], [2.0, 0.0], [0.0, 4.0], [2.0, 4.0]],
        )
        .unwrap();
        assert_eq!(f.sample_bilinear(0.5, 0.5), Some([1.0, 2.0]));
        assert_eq!(f.sample_bilinear(1.0, 1.0), Some([2.0, 4.0]));
        assert_eq!(f.sample_bilinear(1.01, 0.0), None);
        assert_eq!(f.sample_bilinear(-0.01, 0.0), None);
    }
}
