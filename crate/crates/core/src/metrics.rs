//! Reconstruction quality metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{gaussian_taps, LinearOp};
use crate::video::VideoTensor;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Flat metric record. `psnr_db` is `+inf` for identical inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr_db: f64,
    pub ssim: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    pub inter_batch_diff: f64,
    /// Reserved for externally computed perceptual metrics.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lpips: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fvd: Option<f64>,
}

impl MetricReport {
    /// PSNR, SSIM and inter-batch difference of `x` against `reference`, plus
    /// the data residual when a measurement is given.
    pub fn compute(x: &VideoTensor, reference: &VideoTensor, problem: Option<(&LinearOp, &VideoTensor)>) -> Result<Self> {
        Ok(MetricReport {
            psnr_db: psnr(x, reference)?,
            ssim: ssim(x, reference)?,
            residual: problem.map(|(a, y)| residual(a, x, y)).transpose()?,
            inter_batch_diff: if x.shape().frames >= 2 { inter_batch_diff(x)? } else { 0.0 },
            lpips: None,
            fvd: None,
        })
    }
}

/// `10 log10(1 / MSE)` over all voxels, peak value 1.
pub fn psnr(x: &VideoTensor, reference: &VideoTensor) -> Result<f64> {
    reference.ensure_shape(x.shape())?;
    let mse = x
        .as_slice()
        .iter()
        .zip(reference.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.len() as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}

/// Mean over frames of the Gaussian-window SSIM of the channel-mean images
/// (11x11 window, sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1), over
/// window positions that fit inside the frame.
pub fn ssim(x: &VideoTensor, reference: &VideoTensor) -> Result<f64> {
    reference.ensure_shape(x.shape())?;
    let s = x.shape();
    if s.height < SSIM_WINDOW || s.width < SSIM_WINDOW {
        return Err(Error::FrameTooSmall {
            height: s.height,
            width: s.width,
        });
    }
    let g = gaussian_taps(SSIM_SIGMA, SSIM_WINDOW);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let (h, w) = (s.height, s.width);
    let gray = |v: &VideoTensor, n: usize| -> Vec<f64> {
        let mut out = vec![0.0; h * w];
        for c in 0..s.channels {
            let plane = &v.frame(n)[c * h * w..(c + 1) * h * w];
            for (o, p) in out.iter_mut().zip(plane) {
                *o += p / s.channels as f64;
            }
        }
        out
    };

    let mut total = 0.0;
    for n in 0..s.frames {
        let a = gray(x, n);
        let b = gray(reference, n);
        let mut acc = 0.0;
        let positions = (h - SSIM_WINDOW + 1) * (w - SSIM_WINDOW + 1);
        for y0 in 0..=h - SSIM_WINDOW {
            for x0 in 0..=w - SSIM_WINDOW {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for (dy, gy) in g.iter().enumerate() {
                    for (dx, gx) in g.iter().enumerate() {
                        let wgt = gy * gx;
                        let i = (y0 + dy) * w + x0 + dx;
                        ma += wgt * a[i];
                        mb += wgt * b[i];
                        saa += wgt * a[i] * a[i];
                        sbb += wgt * b[i] * b[i];
                        sab += wgt * a[i] * b[i];
                    }
                }
                let va = saa - ma * ma;
                let vb = sbb - mb * mb;
                let cov = sab - ma * mb;
                acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            }
        }
        total += acc / positions as f64;
    }
    Ok(total / s.frames as f64)
}

/// Mean Frobenius norm of consecutive frame differences.
pub fn inter_batch_diff(x: &VideoTensor) -> Result<f64> {
    let n = x.shape().frames;
    if n < 2 {
        return Err(Error::SingleFrame);
    }
    let total: f64 = (0..n - 1)
        .map(|i| {
            x.frame(i + 1)
                .iter()
                .zip(x.frame(i))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    Ok(total / (n - 1) as f64)
}

/// Squared data residual `||Y - A(X)||^2`.
pub fn residual(a: &LinearOp, x: &VideoTensor, y: &VideoTensor) -> Result<f64> {
    let ax = a.apply(x)?;
    y.ensure_shape(ax.shape())?;
    Ok(ax
        .as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(p, q)| (q - p) * (q - p))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{temporal_psf, PsfSpec};
    use crate::video::{synth_video, Shape, SynthKind};

    #[test]
    fn psnr_values() {
        let s = Shape::new(2, 1, 4, 4);
        let x = VideoTensor::filled(s, 0.3);
        assert_eq!(psnr(&x, &x).unwrap(), f64::INFINITY);
        assert!(psnr(&VideoTensor::zeros(s), &VideoTensor::filled(s, 1.0)).unwrap().abs() < 1e-12);
        let y = x.map(|v| v + 0.01);
        // MSE = 1e-4 -> 10 log10(1e4) = 40
        assert!((psnr(&y, &x).unwrap() - 40.0).abs() < 1e-9);
        assert_eq!(psnr(&x, &y).unwrap(), psnr(&y, &x).unwrap());
        assert!(psnr(&x, &VideoTensor::zeros(Shape::new(1, 1, 4, 4))).is_err());
    }

    fn scalar_ssim(mx: f64, my: f64) -> f64 {
        // constant images: zero variance and covariance
        let c1 = 0.01f64.powi(2);
        let c2 = 0.03f64.powi(2);
        ((2.0 * mx * my + c1) * c2) / ((mx * mx + my * my + c1) * c2)
    }

    #[test]
    fn ssim_constants_and_identity() {
        let s = Shape::new(2, 3, 12, 16);
        let half = VideoTensor::filled(s, 0.5);
        assert!((ssim(&half, &half).unwrap() - 1.0).abs() < 1e-12);
        let v = synth_video(SynthKind::MovingSquare, s, 1).unwrap();
        assert!((ssim(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        let zero = VideoTensor::zeros(s);
        let one = VideoTensor::filled(s, 1.0);
        let got = ssim(&one, &zero).unwrap();
        assert!((got - scalar_ssim(1.0, 0.0)).abs() < 1e-12, "{got}");
        assert!((got - 1e-4 / (1.0 + 1e-4)).abs() < 1e-12);
    }

    #[test]
    fn ssim_is_symmetric_and_bounded() {
        let s = Shape::new(3, 1, 14, 13);
        let a = synth_video(SynthKind::MovingSquare, s, 1).unwrap();
        let b = synth_video(SynthKind::GradientDrift, s, 2).unwrap();
        let ab = ssim(&a, &b).unwrap();
        assert!((ab - ssim(&b, &a).unwrap()).abs() < 1e-12);
        assert!((-1.0..1.0).contains(&ab));
        assert!(matches!(
            ssim(&VideoTensor::zeros(Shape::new(1, 1, 10, 20)), &VideoTensor::zeros(Shape::new(1, 1, 10, 20))),
            Err(Error::FrameTooSmall { .. })
        ));
    }

    #[test]
    fn inter_batch_difference() {
        let s = Shape::new(2, 1, 2, 2);
        let x = VideoTensor::from_fn(s, |n, _, _, _| n as f64);
        assert!((inter_batch_diff(&x).unwrap() - 2.0).abs() < 1e-15);
        let same = VideoTensor::filled(Shape::new(5, 2, 3, 3), 0.4);
        assert_eq!(inter_batch_diff(&same).unwrap(), 0.0);
        assert!(matches!(inter_batch_diff(&VideoTensor::zeros(Shape::new(1, 1, 2, 2))), Err(Error::SingleFrame)));

        let v = synth_video(SynthKind::GradientDrift, Shape::new(6, 1, 5, 5), 3).unwrap();
        let mut rev = Vec::new();
        for n in (0..6).rev() {
            rev.extend_from_slice(v.frame(n));
        }
        let rev = VideoTensor::from_vec(v.shape(), rev).unwrap();
        assert!((inter_batch_diff(&v).unwrap() - inter_batch_diff(&rev).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn residual_matches_naive_loop() {
        let s = Shape::new(5, 2, 4, 3);
        let a = temporal_psf(s, PsfSpec::Uniform { width: 3 }).unwrap();
        let x = synth_video(SynthKind::GradientDrift, s, 4).unwrap();
        let y = synth_video(SynthKind::MovingSquare, s, 5).unwrap();
        let ax = a.apply(&x).unwrap();
        let mut naive = 0.0;
        for i in 0..ax.len() {
            let d = y.as_slice()[i] - ax.as_slice()[i];
            naive += d * d;
        }
        assert!((residual(&a, &x, &y).unwrap() - naive).abs() < 1e-12 * naive);
        assert_eq!(residual(&a, &x, &ax).unwrap(), 0.0);

        let id = LinearOp::identity(Shape::new(1, 1, 2, 2)).unwrap();
        let ones = VideoTensor::filled(Shape::new(1, 1, 2, 2), 1.0);
        assert_eq!(residual(&id, &VideoTensor::zeros(ones.shape()), &ones).unwrap(), 4.0);
    }
}
