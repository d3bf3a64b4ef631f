//! Synthetic sequences: a textured square translating over a static
//! textured background, with exact flow and masks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use vosprop_core::{BinaryMask, FlowDirection, FlowField, Frame, SequenceBundle};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub square_size: usize,
    /// Pixels per frame.
    pub velocity: [i32; 2],
    /// Standard deviation of Gaussian noise added to every flow component.
    pub noise_level: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            frames: 20,
            square_size: 16,
            velocity: [2, 0],
            noise_level: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// Top-left corner of the square in frame 0; the trajectory is centered
    /// in the frame.
    pub fn start(&self) -> Result<[i64; 2]> {
        if self.width == 0 || self.height == 0 || self.square_size == 0 {
            return Err(Error::Input(
                "synthetic frame and square sizes must be >= 1".into(),
            ));
        }
        if self.frames < 2 {
            return Err(Error::Input(
                "synthetic sequence needs at least 2 frames".into(),
            ));
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return Err(Error::Input("noise level must be finite and >= 0".into()));
        }
        let mut start = [0i64; 2];
        for (axis, extent) in [self.width, self.height].into_iter().enumerate() {
            let travel = (self.frames as i64 - 1) * i64::from(self.velocity[axis]);
            let lo = travel.min(0);
            let hi = travel.max(0);
            let span = hi - lo + self.square_size as i64;
            if span > extent as i64 {
                return Err(Error::Input(format!(
                    "square of size {} moving {} px leaves the {}x{} frame",
                    self.square_size,
                    travel.abs(),
                    self.width,
                    self.height
                )));
            }
            start[axis] = (extent as i64 - span) / 2 - lo;
        }
        Ok(start)
    }

    /// Square mask of frame `i`.
    pub fn mask(&self, i: usize) -> Result<BinaryMask> {
        let [x0, y0] = self.corner(i)?;
        let s = self.square_size as i64;
        Ok(BinaryMask::from_fn(self.width, self.height, |x, y| {
            let (x, y) = (x as i64, y as i64);
            (x0..x0 + s).contains(&x) && (y0..y0 + s).contains(&y)
        }))
    }

    fn corner(&self, i: usize) -> Result<[i64; 2]> {
        let s = self.start()?;
        Ok([
            s[0] + i as i64 * i64::from(self.velocity[0]),
            s[1] + i as i64 * i64::from(self.velocity[1]),
        ])
    }
}

struct Texture {
    phases: [f64; 6],
    grain: Vec<f32>,
    w: usize,
}

impl Texture {
    fn new(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Self {
        let mut phases = [0.0; 6];
        phases
            .iter_mut()
            .for_each(|p| *p = rng.random::<f64>() * std::f64::consts::TAU);
        let grain = (0..w * h).map(|_| rng.random::<f32>() - 0.5).collect();
        Self { phases, grain, w }
    }

    /// Smooth pattern in roughly `[-1, 1]` plus fine grain.
    fn sample(&self, x: usize, y: usize, channel: usize, period: f64) -> f32 {
        let k = std::f64::consts::TAU / period;
        let a = self.phases[2 * channel];
        let b = self.phases[2 * channel + 1];
        let smooth = 0.5 * ((k * x as f64 + a).sin() + (k * y as f64 * 0.8 + b).cos());
        smooth as f32 + 0.4 * self.grain[y * self.w + x]
    }
}

const BACKGROUND: [f32; 3] = [0.25, 0.45, 0.55];
const FOREGROUND: [f32; 3] = [0.8, 0.3, 0.2];

/// Generates the sequence with frames, exact (optionally noisy) forward and
/// backward flow, and square annotations. Deterministic for a given spec.
pub fn synth_sequence(spec: &SynthSpec) -> Result<SequenceBundle> {
    spec.start()?;
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bg = Texture::new(&mut rng, w, h);
    let fg = Texture::new(&mut rng, spec.square_size, spec.square_size);

    let masks: Vec<BinaryMask> = (0..spec.frames)
        .map(|i| spec.mask(i))
        .collect::<Result<_>>()?;
    let mut frames = Vec::with_capacity(spec.frames);
    for (i, mask) in masks.iter().enumerate() {
        let [x0, y0] = spec.corner(i)?;
        let mut rgb = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let px = if mask.get(x, y) {
                    let (u, v) = ((x as i64 - x0) as usize, (y as i64 - y0) as usize);
                    std::array::from_fn(|c| FOREGROUND[c] + 0.15 * fg.sample(u, v, c, 6.0))
                } else {
                    std::array::from_fn(|c| BACKGROUND[c] + 0.3 * bg.sample(x, y, c, 23.0))
                };
                rgb.push(px.map(|v: f32| v.clamp(0.0, 1.0)));
            }
        }
        frames.push(Frame::new(w, h, i, rgb)?);
    }

    let noise = Normal::new(0.0, spec.noise_level).map_err(|e| Error::Input(e.to_string()))?;
    let v = [spec.velocity[0] as f32, spec.velocity[1] as f32];
    let mut flow = |mask: &BinaryMask, sign: f32, direction| -> Result<FlowField> {
        let vectors = mask
            .values()
            .iter()
            .map(|&inside| {
                let base = if inside {
                    [sign * v[0], sign * v[1]]
                } else {
                    [0.0, 0.0]
                };
                if spec.noise_level > 0.0 {
                    [
                        base[0] + noise.sample(&mut rng) as f32,
                        base[1] + noise.sample(&mut rng) as f32,
                    ]
                } else {
                    base
                }
            })
            .collect();
        Ok(FlowField::new(w, h, direction, vectors)?)
    };
    let mut forward = Vec::with_capacity(spec.frames - 1);
    let mut backward = Vec::with_capacity(spec.frames - 1);
    for i in 0..spec.frames - 1 {
        forward.push(flow(&masks[i], 1.0, FlowDirection::Forward)?);
        backward.push(flow(&masks[i + 1], -1.0, FlowDirection::Backward)?);
    }
    Ok(SequenceBundle::new(
        frames,
        forward,
        backward,
        None,
        Some(masks),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_trajectory_is_centered() {
        let s = SynthSpec::default();
        assert_eq!(s.start().unwrap(), [5, 24]);
        assert_eq!(s.mask(19).unwrap().count(), 256);
        assert!(s.mask(19).unwrap().get(5 + 38 + 15, 24));
    }

    #[test]
    fn oversized_square_is_rejected() {
        let s = SynthSpec {
            square_size: 40,
            ..SynthSpec::default()
        };
        assert!(s.start().is_err());
    }
}
