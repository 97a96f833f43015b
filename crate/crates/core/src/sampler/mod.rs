//! Batch-consistent reverse diffusion for video inverse problems.
//!
//! Each step of [`solve`]:
//!
//! 1. predicts the noise of every frame of `X_t` with an image-level model
//!    and forms the Tweedie estimate `X̂_t`;
//! 2. imposes data consistency on the whole volume with `l` CG steps on
//!    `||Y - A X||^2`, warm-started at `X̂_t` (or one gradient step);
//! 3. renoises to the next timestep, mixing the cached noise prediction with
//!    fresh noise that is shared by all frames when `noise_sync` is set.
//!
//! The last step jumps to the clean state (`alpha_bar = 1`), so its output is
//! the data-consistent estimate itself.

mod blind;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::denoiser::NoisePredictor;
use crate::error::{Error, Result};
use crate::krylov::{cg_data_consistency, gd_data_consistency};
use crate::metrics::{inter_batch_diff, residual};
use crate::operators::LinearOp;
use crate::schedule::{renoise, subsample_steps, tweedie, NoiseSchedule};
use crate::video::{Shape, VideoTensor};

pub use blind::{blind_deblur, estimate_psf, BlindResult};

/// How the Tweedie batch is pulled toward the measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateRule {
    /// `l` conjugate-gradient steps over the Krylov subspace.
    Cg,
    /// One gradient step of size `gamma`.
    Gd,
    /// No data consistency (unconditional sampling).
    None,
}

impl std::str::FromStr for UpdateRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cg" => Ok(UpdateRule::Cg),
            "gd" => Ok(UpdateRule::Gd),
            "none" => Ok(UpdateRule::None),
            _ => Err(Error::InvalidParameter(format!("unknown update rule {s:?}"))),
        }
    }
}

impl std::fmt::Display for UpdateRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UpdateRule::Cg => "cg",
            UpdateRule::Gd => "gd",
            UpdateRule::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub nfe: usize,
    pub eta: f64,
    /// CG depth `l`.
    pub cg_steps: usize,
    pub update: UpdateRule,
    /// Gradient step size, used by [`UpdateRule::Gd`].
    pub gamma: f64,
    /// Share initial and renoising noise across frames.
    pub noise_sync: bool,
    pub seed: u64,
    /// Keep every Tweedie batch in the trace.
    pub trace: bool,
    /// CG early-stop threshold on the normal residual; 0 runs all `l` steps.
    pub cg_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            nfe: 20,
            eta: 0.15,
            cg_steps: 5,
            update: UpdateRule::Cg,
            gamma: 0.5,
            noise_sync: true,
            seed: 0,
            trace: false,
            cg_tol: 0.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nfe == 0 {
            return Err(Error::InvalidParameter("nfe must be >= 1".into()));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta {} must be >= 0", self.eta)));
        }
        if self.update == UpdateRule::Cg && self.cg_steps == 0 {
            return Err(Error::InvalidParameter("CG depth must be >= 1".into()));
        }
        if self.update == UpdateRule::Gd && !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma {} must be > 0", self.gamma)));
        }
        if self.cg_tol.is_nan() || self.cg_tol < 0.0 {
            return Err(Error::InvalidParameter(format!("cg_tol {} must be >= 0", self.cg_tol)));
        }
        Ok(())
    }
}

/// Diagnostics for one reverse step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub t_prev: usize,
    /// `||Y - A X̂_t||^2` before data consistency.
    pub residual_before: Option<f64>,
    /// `||Y - A X̄_t||^2` after data consistency.
    pub residual: Option<f64>,
    /// Mean consecutive-frame distance of the Tweedie batch.
    pub inter_batch_diff: f64,
    #[serde(skip)]
    pub tweedie_batch: Option<VideoTensor>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub steps: Vec<StepRecord>,
}

/// Draws standard normal noise; with `sync`, one frame is drawn and copied
/// into every frame.
fn draw_noise(rng: &mut ChaCha8Rng, shape: Shape, sync: bool) -> VideoTensor {
    let fl = shape.frame_len();
    let count = if sync { fl } else { shape.len() };
    let field: Vec<f64> = (0..count).map(|_| StandardNormal.sample(rng)).collect();
    let data = if sync {
        field.iter().copied().cycle().take(shape.len()).collect()
    } else {
        field
    };
    VideoTensor::from_parts(shape, data)
}

fn reverse_diffusion<P: NoisePredictor + ?Sized>(
    problem: Option<(&LinearOp, &VideoTensor)>,
    model: &P,
    schedule: &NoiseSchedule,
    shape: Shape,
    cfg: &SolverConfig,
) -> Result<(VideoTensor, SolveTrace)> {
    cfg.validate()?;
    shape.validate()?;
    let plan = subsample_steps(schedule, cfg.nfe)?;
    let update = if problem.is_some() { cfg.update } else { UpdateRule::None };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = draw_noise(&mut rng, shape, cfg.noise_sync);
    let mut trace = SolveTrace::default();

    for (i, (t, t_prev)) in plan.iter().enumerate() {
        let at = |what: &str| format!("{what} at step {i} (t={t})");
        let abar = schedule.alpha_bar(t);
        let eps = model.predict(&x, t, abar)?;
        eps.ensure_shape(shape)?;
        eps.ensure_finite(|| at("noise prediction"))?;
        let x_hat = tweedie(&x, &eps, abar)?;
        x_hat.ensure_finite(|| at("Tweedie estimate"))?;

        let (x_bar, residual_before, residual_after) = match (problem, update) {
            (Some((a, y)), UpdateRule::Cg) => {
                let before = residual(a, &x_hat, y)?;
                let (x_bar, _) = cg_data_consistency(a, y, &x_hat, cfg.cg_steps, cfg.cg_tol)
                    .map_err(|e| annotate(e, &at("CG")))?;
                let after = residual(a, &x_bar, y)?;
                (x_bar, Some(before), Some(after))
            }
            (Some((a, y)), UpdateRule::Gd) => {
                let before = residual(a, &x_hat, y)?;
                let x_bar = gd_data_consistency(a, y, &x_hat, cfg.gamma)?;
                let after = residual(a, &x_bar, y)?;
                (x_bar, Some(before), Some(after))
            }
            (Some((a, y)), UpdateRule::None) => {
                let r = residual(a, &x_hat, y)?;
                (x_hat.clone(), Some(r), Some(r))
            }
            (None, _) => (x_hat.clone(), None, None),
        };
        x_bar.ensure_finite(|| at("data-consistency update"))?;

        trace.steps.push(StepRecord {
            t,
            t_prev,
            residual_before,
            residual: residual_after,
            inter_batch_diff: if shape.frames >= 2 { inter_batch_diff(&x_hat)? } else { 0.0 },
            tweedie_batch: cfg.trace.then(|| x_hat.clone()),
        });

        if t_prev == 0 {
            return Ok((x_bar, trace));
        }
        let fresh = draw_noise(&mut rng, shape, cfg.noise_sync);
        x = renoise(&x_bar, &eps, &fresh, schedule, t, t_prev, cfg.eta)?;
        x.ensure_finite(|| at("renoising"))?;
    }
    unreachable!("a step plan always ends at t_prev = 0")
}

fn annotate(e: Error, context: &str) -> Error {
    match e {
        Error::NonFiniteEncountered(what) => Error::NonFiniteEncountered(format!("{what}, {context}")),
        other => other,
    }
}

/// Solves `Y = A(X) + W` for `X` with a per-frame diffusion prior.
pub fn solve<P: NoisePredictor + ?Sized>(
    a: &LinearOp,
    y: &VideoTensor,
    model: &P,
    schedule: &NoiseSchedule,
    cfg: &SolverConfig,
) -> Result<(VideoTensor, SolveTrace)> {
    y.ensure_shape(a.out_shape())?;
    reverse_diffusion(Some((a, y)), model, schedule, a.in_shape(), cfg)
}

/// Reverse diffusion without any measurement.
pub fn unconditional_sample<P: NoisePredictor + ?Sized>(
    model: &P,
    schedule: &NoiseSchedule,
    shape: Shape,
    nfe: usize,
    eta: f64,
    noise_sync: bool,
    seed: u64,
) -> Result<VideoTensor> {
    let cfg = SolverConfig {
        nfe,
        eta,
        update: UpdateRule::None,
        noise_sync,
        seed,
        ..SolverConfig::default()
    };
    reverse_diffusion(None, model, schedule, shape, &cfg).map(|(x, _)| x)
}
