//! Noise schedules and the DDIM / Tweedie algebra.
//!
//! Timesteps are 1-based: index `t` in `1..=T` addresses the base schedule,
//! and index 0 stands for the clean signal (`alpha_bar(0) == 1`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::video::VideoTensor;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    // all tables have length T + 1; slot 0 is the clean state
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
    beta_tilde: Vec<f64>,
}

impl NoiseSchedule {
    /// Linear beta schedule from `beta_start` to `beta_end` inclusive.
    pub fn linear(t_base: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if t_base < 2 {
            return Err(Error::BadRange(format!("t_base {t_base} < 2")));
        }
        if !(0.0 < beta_start && beta_start <= beta_end && beta_end < 1.0) {
            return Err(Error::BadRange(format!(
                "need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
            )));
        }
        let span = (t_base - 1) as f64;
        let betas = (0..t_base)
            .map(|i| beta_start + (beta_end - beta_start) * i as f64 / span)
            .collect::<Vec<_>>();
        Self::from_betas(&betas)
    }

    /// Builds the derived tables from `beta[1..=T]`.
    pub fn from_betas(betas: &[f64]) -> Result<Self> {
        if betas.len() < 2 {
            return Err(Error::BadRange("need at least two betas".into()));
        }
        if betas.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return Err(Error::BadRange("every beta must lie in (0, 1)".into()));
        }
        if betas.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::BadRange("beta must be nondecreasing".into()));
        }
        let t_base = betas.len();
        let mut beta = Vec::with_capacity(t_base + 1);
        beta.push(0.0);
        beta.extend_from_slice(betas);
        let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bar = vec![1.0; t_base + 1];
        for t in 1..=t_base {
            alpha_bar[t] = alpha_bar[t - 1] * alpha[t];
        }
        let mut beta_tilde = vec![0.0; t_base + 1];
        for t in 1..=t_base {
            beta_tilde[t] = (1.0 - alpha_bar[t - 1]) / (1.0 - alpha_bar[t]) * beta[t];
        }
        Ok(NoiseSchedule {
            beta,
            alpha,
            alpha_bar,
            beta_tilde,
        })
    }

    pub fn t_base(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    /// Posterior variance of the single-step reverse transition at `t`.
    pub fn beta_tilde(&self, t: usize) -> f64 {
        self.beta_tilde[t]
    }

    /// Noise standard deviation of the (possibly strided) reverse jump
    /// `t -> t_prev` at `eta = 1`. For `t_prev == t - 1` this is
    /// `sqrt(beta_tilde(t))`; it is zero when `t_prev == 0`.
    pub fn jump_sigma(&self, t: usize, t_prev: usize) -> f64 {
        let ab_t = self.alpha_bar[t];
        let ab_prev = self.alpha_bar[t_prev];
        let var = (1.0 - ab_prev) / (1.0 - ab_t) * (1.0 - ab_t / ab_prev);
        var.max(0.0).sqrt()
    }

    fn check_index(&self, t: usize) -> Result<()> {
        if t > self.t_base() {
            return Err(Error::InvalidParameter(format!(
                "timestep {t} outside 0..={}",
                self.t_base()
            )));
        }
        Ok(())
    }
}

impl Default for NoiseSchedule {
    /// Linear betas from 1e-4 to 0.02 over 1000 steps.
    fn default() -> Self {
        NoiseSchedule::linear(1000, 1e-4, 0.02).expect("default schedule is valid")
    }
}

pub fn make_linear_schedule(t_base: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    NoiseSchedule::linear(t_base, beta_start, beta_end)
}

/// A decreasing sequence of base-schedule timesteps, one per function
/// evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepPlan {
    timesteps: Vec<usize>,
}

impl StepPlan {
    pub fn nfe(&self) -> usize {
        self.timesteps.len()
    }

    pub fn timesteps(&self) -> &[usize] {
        &self.timesteps
    }

    /// Timestep the `i`-th step jumps to; 0 after the last step.
    pub fn prev(&self, i: usize) -> usize {
        self.timesteps.get(i + 1).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.nfe()).map(|i| (self.timesteps[i], self.prev(i)))
    }
}

/// Uniformly strided plan: step `i` sits at `T - floor(i * T / nfe)`.
pub fn subsample_steps(s: &NoiseSchedule, nfe: usize) -> Result<StepPlan> {
    let t_base = s.t_base();
    if nfe == 0 || nfe > t_base {
        return Err(Error::BadNfe { nfe, t_base });
    }
    let timesteps = (0..nfe).map(|i| t_base - i * t_base / nfe).collect();
    Ok(StepPlan { timesteps })
}

/// Tweedie denoising: `(x_t - sqrt(1 - abar) * eps) / sqrt(abar)`.
pub fn tweedie(x_t: &VideoTensor, eps_hat: &VideoTensor, abar_t: f64) -> Result<VideoTensor> {
    eps_hat.ensure_shape(x_t.shape())?;
    check_abar(abar_t)?;
    let inv = 1.0 / abar_t.sqrt();
    let noise = (1.0 - abar_t).sqrt();
    x_t.lin_comb(inv, eps_hat, -noise * inv)
}

/// Coefficients `(deterministic, stochastic)` of the DDIM renoising step.
/// Their squares sum to `1 - alpha_bar(t_prev)`.
pub fn renoise_coefficients(s: &NoiseSchedule, t: usize, t_prev: usize, eta: f64) -> Result<(f64, f64)> {
    s.check_index(t)?;
    s.check_index(t_prev)?;
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("eta {eta} must be finite and >= 0")));
    }
    if t == 0 || t_prev >= t {
        return Err(Error::InvalidParameter(format!(
            "renoise needs t > t_prev >= 0, got {t} -> {t_prev}"
        )));
    }
    let sto = eta * s.jump_sigma(t, t_prev);
    let det_sq = 1.0 - s.alpha_bar(t_prev) - sto * sto;
    if det_sq < -1e-12 {
        return Err(Error::EtaTooLarge { eta, t, t_prev });
    }
    Ok((det_sq.max(0.0).sqrt(), sto))
}

/// `sqrt(abar_prev) * xbar + c_det * eps_det + c_sto * eps_sto`.
pub fn renoise(
    xbar: &VideoTensor,
    eps_det: &VideoTensor,
    eps_sto: &VideoTensor,
    s: &NoiseSchedule,
    t: usize,
    t_prev: usize,
    eta: f64,
) -> Result<VideoTensor> {
    let shape = xbar.shape();
    eps_det.ensure_shape(shape)?;
    eps_sto.ensure_shape(shape)?;
    let (c_det, c_sto) = renoise_coefficients(s, t, t_prev, eta)?;
    let c_x = s.alpha_bar(t_prev).sqrt();
    let data = xbar
        .as_slice()
        .iter()
        .zip(eps_det.as_slice())
        .zip(eps_sto.as_slice())
        .map(|((&x, &d), &z)| c_x * x + c_det * d + c_sto * z)
        .collect();
    Ok(VideoTensor::from_parts(shape, data))
}

pub(crate) fn check_abar(abar_t: f64) -> Result<()> {
    if !(abar_t > 0.0 && abar_t <= 1.0) {
        return Err(Error::InvalidParameter(format!("alpha_bar {abar_t} outside (0, 1]")));
    }
    Ok(())
}
