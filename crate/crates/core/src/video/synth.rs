use std::f64::consts::TAU;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Shape, VideoTensor};
use crate::error::{Error, Result};

/// Synthetic test-video families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// A bright square on a faint textured background; the whole frame
    /// shifts one pixel to the right per frame, wrapping around.
    MovingSquare,
    /// A smooth sinusoidal pattern whose phase drifts over time.
    GradientDrift,
    /// One textured frame repeated.
    Static,
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moving_square" => Ok(SynthKind::MovingSquare),
            "gradient_drift" => Ok(SynthKind::GradientDrift),
            "static" => Ok(SynthKind::Static),
            other => Err(Error::InvalidParameter(format!("unknown video kind {other:?}"))),
        }
    }
}

/// Deterministic synthetic video with values in `[0, 1]`.
pub fn synth_video(kind: SynthKind, shape: Shape, seed: u64) -> Result<VideoTensor> {
    shape.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gains: Vec<f64> = (0..shape.channels).map(|_| rng.random_range(0.7..=1.0)).collect();
    let (h, w) = (shape.height, shape.width);

    // low-amplitude background from a few random sinusoids
    let waves: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(1..=3) as f64,
                rng.random_range(1..=3) as f64,
                rng.random_range(0.0..TAU),
            )
        })
        .collect();
    let background = |y: usize, x: usize| {
        let s: f64 = waves
            .iter()
            .map(|&(fy, fx, ph)| (TAU * (fy * y as f64 / h as f64 + fx * x as f64 / w as f64) + ph).sin())
            .sum();
        0.15 + 0.05 * s / 3.0
    };

    let video = match kind {
        SynthKind::MovingSquare => {
            let side = (h.min(w) / 4).max(1);
            let sy = rng.random_range(0..h);
            let sx = rng.random_range(0..w);
            VideoTensor::from_fn(shape, |n, c, y, x| {
                // frame n is frame 0 rolled right by n pixels
                let x0 = (x + w - n % w) % w;
                let dy = (y + h - sy) % h;
                let dx = (x0 + w - sx) % w;
                let base = if dy < side && dx < side { 0.9 } else { background(y, x0) };
                gains[c] * base
            })
        }
        SynthKind::GradientDrift => {
            let phase = rng.random_range(0.0..TAU);
            let rate = TAU / shape.frames.max(8) as f64;
            VideoTensor::from_fn(shape, |n, c, y, x| {
                let arg = TAU * (x as f64 / w as f64 + 0.5 * y as f64 / h as f64) + phase + rate * n as f64;
                gains[c] * (0.5 + 0.4 * arg.sin())
            })
        }
        SynthKind::Static => VideoTensor::from_fn(shape, |_, c, y, x| gains[c] * (background(y, x) + 0.5)),
    };
    Ok(video)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roll_right(frame: &[f64], channels: usize, h: usize, w: usize) -> Vec<f64> {
        let mut out = vec![0.0; frame.len()];
        for c in 0..channels {
            for y in 0..h {
                for x in 0..w {
                    out[(c * h + y) * w + (x + 1) % w] = frame[(c * h + y) * w + x];
                }
            }
        }
        out
    }

    #[test]
    fn static_frames_are_identical() {
        let v = synth_video(SynthKind::Static, Shape::new(4, 3, 6, 7), 3).unwrap();
        for n in 1..4 {
            assert_eq!(v.frame(n), v.frame(0));
        }
    }

    #[test]
    fn same_seed_same_video() {
        for kind in [SynthKind::MovingSquare, SynthKind::GradientDrift, SynthKind::Static] {
            let s = Shape::new(5, 2, 9, 8);
            assert_eq!(synth_video(kind, s, 11).unwrap(), synth_video(kind, s, 11).unwrap());
        }
        let s = Shape::new(2, 1, 8, 8);
        assert_ne!(
            synth_video(SynthKind::MovingSquare, s, 1).unwrap(),
            synth_video(SynthKind::MovingSquare, s, 2).unwrap()
        );
    }

    #[test]
    fn moving_square_shifts_one_pixel_per_frame() {
        let s = Shape::new(20, 3, 8, 12);
        let v = synth_video(SynthKind::MovingSquare, s, 5).unwrap();
        for n in 0..s.frames - 1 {
            assert_eq!(v.frame(n + 1), roll_right(v.frame(n), 3, 8, 12).as_slice());
        }
    }

    #[test]
    fn values_in_unit_interval() {
        for kind in [SynthKind::MovingSquare, SynthKind::GradientDrift, SynthKind::Static] {
            let v = synth_video(kind, Shape::new(6, 3, 16, 16), 9).unwrap();
            assert!(v.as_slice().iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn degenerate_dims() {
        let v = synth_video(SynthKind::MovingSquare, Shape::new(3, 1, 1, 1), 0).unwrap();
        assert_eq!(v.len(), 3);
        assert!(synth_video(SynthKind::Static, Shape::new(1, 0, 1, 1), 0).is_err());
    }
}
