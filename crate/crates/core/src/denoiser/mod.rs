//! Per-frame noise predictors.
//!
//! A predictor maps a noisy batch `x_t` at timestep `t` to an estimate of
//! the noise that produced it. Every predictor here treats frames
//! independently: frame `i` of the output depends only on frame `i` of the
//! input, so a video is denoised as a batch of images.

mod external;
pub mod protocol;

use rayon::prelude::*;

use crate::error::Result;
use crate::operators::LinearOp;
use crate::schedule::check_abar;
use crate::video::{Shape, VideoTensor};

pub use external::ExternalDenoiser;

/// Largest smoothing width the heuristic denoiser will use, in pixels.
pub const MAX_SMOOTHING_SIGMA: f64 = 5.0;

pub trait NoisePredictor {
    fn predict(&self, x_t: &VideoTensor, t: usize, abar_t: f64) -> Result<VideoTensor>;
}

impl<P: NoisePredictor + ?Sized> NoisePredictor for &P {
    fn predict(&self, x_t: &VideoTensor, t: usize, abar_t: f64) -> Result<VideoTensor> {
        (**self).predict(x_t, t, abar_t)
    }
}

/// The built-in predictors plus the external bridge.
#[derive(Debug)]
pub enum EpsModel {
    /// Always predicts zero noise.
    Zero,
    /// Exact predictor for a prior `x0 ~ N(mu, sigma0^2 I)`: Tweedie applied
    /// to its output is the analytic posterior mean.
    OracleGaussian { mu: f64, sigma0: f64 },
    /// Training-free stand-in prior: the clean estimate is a Gaussian
    /// smoothing of `x_t / sqrt(abar)` whose width grows with the noise level.
    Smoother { scale: f64 },
    /// A child process speaking the EPQ1/EPR1 protocol.
    External(ExternalDenoiser),
}

impl NoisePredictor for EpsModel {
    fn predict(&self, x_t: &VideoTensor, t: usize, abar_t: f64) -> Result<VideoTensor> {
        check_abar(abar_t)?;
        match self {
            EpsModel::Zero => Ok(VideoTensor::zeros(x_t.shape())),
            EpsModel::OracleGaussian { mu, sigma0 } => Ok(oracle_gaussian_eps(x_t, abar_t, *mu, *sigma0)),
            EpsModel::Smoother { scale } => smoother_denoise(x_t, abar_t, *scale).map(|(eps, _)| eps),
            EpsModel::External(bridge) => bridge.predict(x_t, t, abar_t),
        }
    }
}

/// `eps = sqrt(1 - abar) (x_t - sqrt(abar) mu) / (abar sigma0^2 + 1 - abar)`,
/// the noise implied by the Gaussian posterior mean
/// `mu + sqrt(abar) sigma0^2 / (abar sigma0^2 + 1 - abar) (x_t - sqrt(abar) mu)`.
pub fn oracle_gaussian_eps(x_t: &VideoTensor, abar_t: f64, mu: f64, sigma0: f64) -> VideoTensor {
    let sa = abar_t.sqrt();
    let denom = abar_t * sigma0 * sigma0 + 1.0 - abar_t;
    let gain = (1.0 - abar_t).sqrt() / denom;
    x_t.map(|x| gain * (x - sa * mu))
}

/// Smoothing width for a noise level: `scale * sqrt((1 - abar) / abar)`,
/// clamped to `[0, MAX_SMOOTHING_SIGMA]`.
pub fn smoothing_sigma(abar_t: f64, scale: f64) -> f64 {
    (scale * ((1.0 - abar_t) / abar_t).sqrt()).clamp(0.0, MAX_SMOOTHING_SIGMA)
}

/// Returns `(eps_hat, x0_hat)` for the smoothing denoiser.
pub fn smoother_denoise(x_t: &VideoTensor, abar_t: f64, scale: f64) -> Result<(VideoTensor, VideoTensor)> {
    check_abar(abar_t)?;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(crate::Error::InvalidParameter(format!("smoother scale {scale} must be > 0")));
    }
    let shape = x_t.shape();
    if abar_t == 1.0 {
        return Ok((VideoTensor::zeros(shape), x_t.clone()));
    }
    let sa = abar_t.sqrt();
    let scaled = x_t.map(|v| v / sa);
    let sigma = smoothing_sigma(abar_t, scale);
    let x0 = if sigma < 1e-6 {
        scaled
    } else {
        let width = 2 * (3.0 * sigma).ceil() as usize + 1;
        // one plane at a time keeps the blur strictly per frame
        let plane = Shape::new(1, 1, shape.height, shape.width);
        let blur = LinearOp::spatial_gaussian_blur(plane, sigma, width)?;
        let mut data = vec![0.0; shape.len()];
        data.par_chunks_mut(plane.len())
            .zip(scaled.as_slice().par_chunks(plane.len()))
            .for_each(|(dst, src)| dst.copy_from_slice(&blur.apply_slice(src)));
        VideoTensor::from_parts(shape, data)
    };
    let inv_noise = 1.0 / (1.0 - abar_t).sqrt();
    let eps = x_t.lin_comb(inv_noise, &x0, -sa * inv_noise)?;
    Ok((eps, x0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::tweedie;

    fn wavy(shape: Shape) -> VideoTensor {
        VideoTensor::from_fn(shape, |n, c, y, x| {
            ((n as f64 * 0.7 + c as f64 * 1.3 + y as f64 * 0.45 - x as f64 * 0.3).sin() + 1.0) * 0.5
        })
    }

    #[test]
    fn zero_model() {
        let x = wavy(Shape::new(2, 1, 4, 4));
        let eps = EpsModel::Zero.predict(&x, 10, 0.64).unwrap();
        assert!(eps.as_slice().iter().all(|&v| v == 0.0));
        let x0 = tweedie(&x, &eps, 0.64).unwrap();
        assert!(x0.sub(&x.map(|v| v / 0.8)).unwrap().norm() < 1e-12);
    }

    #[test]
    fn oracle_matches_posterior_mean() {
        let (mu, s0) = (0.4, 0.25);
        let x = wavy(Shape::new(3, 2, 5, 5)).map(|v| 3.0 * v - 1.0);
        let model = EpsModel::OracleGaussian { mu, sigma0: s0 };
        for &abar in &[0.01, 0.1, 0.5, 0.99, 1.0] {
            let eps = model.predict(&x, 1, abar).unwrap();
            let x0 = tweedie(&x, &eps, abar).unwrap();
            let sa: f64 = abar.sqrt();
            let k = sa * s0 * s0 / (abar * s0 * s0 + 1.0 - abar);
            for (&xt, &got) in x.as_slice().iter().zip(x0.as_slice()) {
                let want = mu + k * (xt - sa * mu);
                assert!((got - want).abs() <= 1e-8, "abar {abar}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn frames_are_independent() {
        let shape = Shape::new(4, 1, 12, 12);
        let x = wavy(shape);
        let models = [
            EpsModel::Zero,
            EpsModel::OracleGaussian { mu: 0.5, sigma0: 0.2 },
            EpsModel::Smoother { scale: 1.5 },
        ];
        // duplicate frame 2 into frame 0 and swap frames 1 and 3
        let mut data = x.as_slice().to_vec();
        let fl = shape.frame_len();
        data.copy_within(2 * fl..3 * fl, 0);
        let (a, b) = data.split_at_mut(3 * fl);
        a[fl..2 * fl].swap_with_slice(&mut b[..fl]);
        let permuted = VideoTensor::from_vec(shape, data).unwrap();
        for m in &models {
            let e = m.predict(&x, 200, 0.3).unwrap();
            let p = m.predict(&permuted, 200, 0.3).unwrap();
            assert_eq!(p.frame(0), e.frame(2));
            assert_eq!(p.frame(2), e.frame(2));
            assert_eq!(p.frame(1), e.frame(3));
            assert_eq!(p.frame(3), e.frame(1));
            let single = m.predict(&x.slice_frames(2, 1).unwrap(), 200, 0.3).unwrap();
            assert_eq!(single.frame(0), e.frame(2));
        }
    }

    #[test]
    fn smoother_clean_limit() {
        let x = wavy(Shape::new(2, 3, 6, 6));
        let (eps, x0) = smoother_denoise(&x, 1.0, 2.0).unwrap();
        assert!(eps.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(x0, x);
        assert_eq!(smoothing_sigma(1.0, 2.0), 0.0);
        assert_eq!(smoothing_sigma(1e-6, 2.0), MAX_SMOOTHING_SIGMA);
    }

    #[test]
    fn smoother_keeps_constants() {
        let shape = Shape::new(2, 1, 8, 8);
        let abar = 0.36;
        let x = VideoTensor::filled(shape, 0.3);
        let (eps, x0) = smoother_denoise(&x, abar, 1.0).unwrap();
        assert!(x0.as_slice().iter().all(|&v| (v - 0.5).abs() < 1e-12));
        let back = tweedie(&x, &eps, abar).unwrap();
        assert!(back.as_slice().iter().all(|&v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn smoother_tweedie_round_trip() {
        let x = wavy(Shape::new(3, 1, 10, 9)).map(|v| 2.0 * v - 0.7);
        for &abar in &[0.02, 0.3, 0.8, 0.999] {
            let (eps, x0) = smoother_denoise(&x, abar, 1.0).unwrap();
            let back = tweedie(&x, &eps, abar).unwrap();
            assert!(back.sub(&x0).unwrap().norm() <= 1e-6 * x0.norm().max(1.0));
        }
        assert!(smoother_denoise(&x, 0.5, 0.0).is_err());
    }

    #[test]
    fn rejects_bad_alpha_bar() {
        let x = wavy(Shape::new(1, 1, 2, 2));
        assert!(EpsModel::Zero.predict(&x, 1, 0.0).is_err());
        assert!(EpsModel::Zero.predict(&x, 1, 1.5).is_err());
    }
}
