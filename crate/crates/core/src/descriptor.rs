//! Superpixel appearance descriptors.
//!
//! Layout (59 values): CIELAB histogram (3 x 8 bins), RGB histogram
//! (3 x 8 bins), unsigned gradient-orientation histogram (9 bins) and the
//! normalized centroid. The LAB, RGB and orientation blocks are each
//! L2-normalized, then the whole vector is L2-normalized, so squared
//! distances between descriptors lie in `[0, 4]`.

use alloc::vec::Vec;

use crate::field::Frame;
use crate::superpixel::{frame_to_lab, Superpixel, SuperpixelSegmentation};

pub const COLOR_BINS: usize = 8;
pub const ORIENTATION_BINS: usize = 9;
pub const DESCRIPTOR_LEN: usize = 6 * COLOR_BINS + ORIENTATION_BINS + 2;

const LAB_OFFSET: usize = 0;
const RGB_OFFSET: usize = 3 * COLOR_BINS;
const HOG_OFFSET: usize = 6 * COLOR_BINS;
const CENTROID_OFFSET: usize = HOG_OFFSET + ORIENTATION_BINS;

// Extent of the sRGB gamut in CIELAB (D65).
const LAB_RANGE: [(f64, f64); 3] = [(0.0, 100.0), (-86.185, 98.254), (-107.863, 94.482)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Descriptor(pub [f64; DESCRIPTOR_LEN]);

impl Descriptor {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn lab_histogram(&self) -> &[f64] {
        &self.0[LAB_OFFSET..RGB_OFFSET]
    }

    pub fn rgb_histogram(&self) -> &[f64] {
        &self.0[RGB_OFFSET..HOG_OFFSET]
    }

    pub fn orientation_histogram(&self) -> &[f64] {
        &self.0[HOG_OFFSET..CENTROID_OFFSET]
    }

    pub fn centroid(&self) -> &[f64] {
        &self.0[CENTROID_OFFSET..]
    }

    pub fn norm(&self) -> f64 {
        l2(&self.0)
    }

    pub fn squared_distance(&self, other: &Self) -> f64 {
        squared_distance(&self.0, &other.0)
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn l2(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

fn normalize_block(v: &mut [f64]) {
    let n = l2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn bin(value: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let t = (value - lo) / (hi - lo) * bins as f64;
    if t <= 0.0 {
        0
    } else {
        (t as usize).min(bins - 1)
    }
}

/// Per-pixel quantities shared by all superpixels of a frame.
#[derive(Debug, Clone)]
pub struct FrameFeatures<'a> {
    frame: &'a Frame,
    lab: Vec<[f64; 3]>,
    grad_magnitude: Vec<f64>,
    grad_bin: Vec<u8>,
}

impl<'a> FrameFeatures<'a> {
    pub fn new(frame: &'a Frame) -> Self {
        let (w, h) = frame.dims();
        let luma: Vec<f64> = frame
            .rgb()
            .iter()
            .map(|c| 0.299 * f64::from(c[0]) + 0.587 * f64::from(c[1]) + 0.114 * f64::from(c[2]))
            .collect();
        let mut grad_magnitude = Vec::with_capacity(w * h);
        let mut grad_bin = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let gx =
                    0.5 * (luma[y * w + (x + 1).min(w - 1)] - luma[y * w + x.saturating_sub(1)]);
                let gy =
                    0.5 * (luma[(y + 1).min(h - 1) * w + x] - luma[y.saturating_sub(1) * w + x]);
                let mut theta = libm::atan2(gy, gx);
                if theta < 0.0 {
                    theta += core::f64::consts::PI;
                }
                grad_magnitude.push(libm::sqrt(gx * gx + gy * gy));
                grad_bin.push(bin(theta, 0.0, core::f64::consts::PI, ORIENTATION_BINS) as u8);
            }
        }
        Self {
            frame,
            lab: frame_to_lab(frame),
            grad_magnitude,
            grad_bin,
        }
    }

    pub fn describe(&self, sp: &Superpixel) -> Descriptor {
        let mut d = self.describe_blocks(sp);
        normalize_block(&mut d.0);
        d
    }

    /// Descriptor with each block normalized but without the final global
    /// normalization; the centroid entries are the raw normalized position.
    pub fn describe_blocks(&self, sp: &Superpixel) -> Descriptor {
        let mut d = [0.0; DESCRIPTOR_LEN];
        let rgb = self.frame.rgb();
        for &p in &sp.pixels {
            for c in 0..3 {
                let (lo, hi) = LAB_RANGE[c];
                d[LAB_OFFSET + c * COLOR_BINS + bin(self.lab[p][c], lo, hi, COLOR_BINS)] += 1.0;
                d[RGB_OFFSET + c * COLOR_BINS + bin(f64::from(rgb[p][c]), 0.0, 1.0, COLOR_BINS)] +=
                    1.0;
            }
            d[HOG_OFFSET + self.grad_bin[p] as usize] += self.grad_magnitude[p];
        }
        normalize_block(&mut d[LAB_OFFSET..RGB_OFFSET]);
        normalize_block(&mut d[RGB_OFFSET..HOG_OFFSET]);
        normalize_block(&mut d[HOG_OFFSET..CENTROID_OFFSET]);
        let (w, h) = self.frame.dims();
        d[CENTROID_OFFSET] = (sp.centroid.0 + 0.5) / w as f64;
        d[CENTROID_OFFSET + 1] = (sp.centroid.1 + 0.5) / h as f64;
        Descriptor(d)
    }
}

pub fn describe_superpixel(frame: &Frame, sp: &Superpixel) -> Descriptor {
    FrameFeatures::new(frame).describe(sp)
}

pub fn describe_frame(frame: &Frame, seg: &SuperpixelSegmentation) -> Vec<Descriptor> {
    let features = FrameFeatures::new(frame);
    seg.superpixels()
        .iter()
        .map(|s| features.describe(s))
        .collect()
}
