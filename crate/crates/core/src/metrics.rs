//! Region (Jaccard) and contour (boundary F-measure) accuracy.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{check_dims, Error, Result};
use crate::field::BinaryMask;

/// `|pred & gt| / |pred | gt|`; 1 when both are empty.
pub fn region_jaccard(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    check_dims("jaccard", gt.dims(), pred.dims())?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&a, &b) in pred.values().iter().zip(gt.values()) {
        inter += usize::from(a && b);
        union += usize::from(a || b);
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

/// Foreground pixels with at least one 4-neighbour in the background.
pub fn boundary_pixels(mask: &BinaryMask) -> Vec<(usize, usize)> {
    let (w, h) = mask.dims();
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let edge = (x > 0 && !mask.get(x - 1, y))
                || (x + 1 < w && !mask.get(x + 1, y))
                || (y > 0 && !mask.get(x, y - 1))
                || (y + 1 < h && !mask.get(x, y + 1));
            if edge {
                out.push((x, y));
            }
        }
    }
    out
}

/// `ceil(0.008 * diagonal)`, at least 1.
pub fn default_tolerance(width: usize, height: usize) -> usize {
    let diag = libm::sqrt((width * width + height * height) as f64);
    (libm::ceil(0.008 * diag) as usize).max(1)
}

fn matched_fraction(
    points: &[(usize, usize)],
    target: &[bool],
    w: usize,
    h: usize,
    r: usize,
) -> f64 {
    let r2 = (r * r) as isize;
    let r = r as isize;
    let hits = points
        .iter()
        .filter(|&&(x, y)| {
            (-r..=r).any(|dy| {
                (-r..=r).any(|dx| {
                    let (tx, ty) = (x as isize + dx, y as isize + dy);
                    dx * dx + dy * dy <= r2
                        && tx >= 0
                        && ty >= 0
                        && (tx as usize) < w
                        && (ty as usize) < h
                        && target[ty as usize * w + tx as usize]
                })
            })
        })
        .count();
    hits as f64 / points.len() as f64
}

/// Boundary F-measure with matches accepted within `tolerance` pixels
/// (Euclidean). 1 when both boundaries are empty, 0 when exactly one is.
pub fn contour_accuracy(pred: &BinaryMask, gt: &BinaryMask, tolerance: usize) -> Result<f64> {
    check_dims("contour accuracy", gt.dims(), pred.dims())?;
    let (w, h) = gt.dims();
    let pb = boundary_pixels(pred);
    let gb = boundary_pixels(gt);
    match (pb.is_empty(), gb.is_empty()) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let to_map = |pts: &[(usize, usize)]| {
        let mut m = alloc::vec![false; w * h];
        for &(x, y) in pts {
            m[y * w + x] = true;
        }
        m
    };
    let precision = matched_fraction(&pb, &to_map(&gb), w, h, tolerance);
    let recall = matched_fraction(&gb, &to_map(&pb), w, h, tolerance);
    Ok(if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    })
}

/// Summary of a per-frame score sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreSummary {
    pub mean: f64,
    /// Fraction of frames scoring strictly above 0.5.
    pub recall: f64,
    /// Mean of the first `ceil(F / 4)` frames minus mean of the last.
    pub decay: f64,
}

impl ScoreSummary {
    pub fn from_scores(scores: &[f64]) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::InvalidInput("no frames to summarize".into()));
        }
        let n = scores.len();
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        let q = n.div_ceil(4);
        Ok(Self {
            mean: mean(scores),
            recall: scores.iter().filter(|&&s| s > 0.5).count() as f64 / n as f64,
            decay: mean(&scores[..q]) - mean(&scores[n - q..]),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub name: String,
    pub j: Vec<f64>,
    pub f: Vec<f64>,
    pub j_summary: ScoreSummary,
    pub f_summary: ScoreSummary,
}

/// Scores every frame with the default contour tolerance.
pub fn evaluate_sequence(
    name: &str,
    preds: &[BinaryMask],
    gts: &[BinaryMask],
) -> Result<EvalReport> {
    if preds.len() != gts.len() {
        return Err(Error::LengthMismatch {
            context: "predicted vs ground-truth masks",
            expected: gts.len(),
            found: preds.len(),
        });
    }
    let mut j = Vec::with_capacity(gts.len());
    let mut f = Vec::with_capacity(gts.len());
    for (p, g) in preds.iter().zip(gts) {
        let (w, h) = g.dims();
        j.push(region_jaccard(p, g)?);
        f.push(contour_accuracy(p, g, default_tolerance(w, h))?);
    }
    Ok(EvalReport {
        name: name.into(),
        j_summary: ScoreSummary::from_scores(&j)?,
        f_summary: ScoreSummary::from_scores(&f)?,
        j,
        f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(w: usize, h: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| (x0..x1).contains(&x) && (y0..y1).contains(&y))
    }

    #[test]
    fn jaccard_cases() {
        let a = rect(8, 8, 0, 0, 4, 4);
        assert_eq!(region_jaccard(&a, &a).unwrap(), 1.0);
        assert_eq!(region_jaccard(&a, &rect(8, 8, 4, 4, 8, 8)).unwrap(), 0.0);
        let half = rect(8, 8, 2, 0, 6, 4);
        assert!((region_jaccard(&half, &a).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let e = BinaryMask::empty(8, 8);
        assert_eq!(region_jaccard(&e, &e).unwrap(), 1.0);
    }

    #[test]
    fn contour_cases() {
        let a = rect(32, 32, 8, 8, 20, 20);
        assert_eq!(contour_accuracy(&a, &a, 1).unwrap(), 1.0);
        assert_eq!(
            contour_accuracy(&rect(32, 32, 9, 8, 21, 20), &a, 1).unwrap(),
            1.0
        );
        assert_eq!(
            contour_accuracy(&BinaryMask::empty(32, 32), &a, 1).unwrap(),
            0.0
        );
        assert!(contour_accuracy(&rect(32, 32, 12, 8, 24, 20), &a, 1).unwrap() < 1.0);
    }

    #[test]
    fn summary_arithmetic() {
        let s = ScoreSummary::from_scores(&[0.8, 0.8, 0.4, 0.4]).unwrap();
        assert!((s.mean - 0.6).abs() < 1e-15);
        assert_eq!(s.recall, 0.5);
        assert!((s.decay - 0.4).abs() < 1e-15);
        assert_eq!(ScoreSummary::from_scores(&[0.5; 3]).unwrap().recall, 0.0);
    }

    #[test]
    fn tolerance_default() {
        assert_eq!(default_tolerance(854, 480), 8);
        assert_eq!(default_tolerance(64, 64), 1);
    }
}
