//! Gradient-magnitude edge map, used when no precomputed edge
//! probabilities are available. Considerably weaker than a trained edge
//! detector: texture responds as strongly as object contours.

use alloc::vec::Vec;

use crate::field::{normalize01_in_place, Frame, SaliencyField};

/// Central-difference gradient magnitude over all three channels,
/// rescaled to `[0, 1]`. Borders replicate the outermost pixel.
pub fn fallback_edge_map(frame: &Frame) -> SaliencyField {
    let (w, h) = frame.dims();
    let mut values = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
            let (l, r) = (frame.pixel(xl, y), frame.pixel(xr, y));
            let (u, d) = (frame.pixel(x, yu), frame.pixel(x, yd));
            let mut sum = 0.0f64;
            for c in 0..3 {
                let gx = 0.5 * f64::from(r[c] - l[c]);
                let gy = 0.5 * f64::from(d[c] - u[c]);
                sum += gx * gx + gy * gy;
            }
            values.push(libm::sqrt(sum));
        }
    }
    normalize01_in_place(&mut values);
    SaliencyField::new(w, h, values).expect("dimensions match the frame")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_frame_has_no_edges() {
        let f = Frame::uniform(8, 6, 0, [0.2, 0.4, 0.6]).unwrap();
        assert!(fallback_edge_map(&f).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_step_peaks_at_step() {
        let rgb = (0..8 * 5)
            .map(|p| if p % 8 < 4 { [0.0; 3] } else { [1.0; 3] })
            .collect();
        let f = Frame::new(8, 5, 0, rgb).unwrap();
        let e = fallback_edge_map(&f);
        for y in 0..5 {
            for x in 0..8 {
                let expected = if x == 3 || x == 4 { 1.0 } else { 0.0 };
                assert_eq!(e.at(x, y), expected, "({x}, {y})");
            }
        }
    }
}
