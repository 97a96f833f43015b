//! Batch-consistent diffusion sampling for video inverse problems.
//!
//! A video is treated as a batch of frames. Each frame is denoised by an
//! image-level noise predictor, data consistency is imposed on the whole
//! spatio-temporal volume with a few conjugate-gradient steps, and every
//! frame is renoised with the same noise field. The crate also provides the
//! degradation operators, classical baselines and metrics needed to run and
//! evaluate such solvers.

pub mod baselines;
pub mod denoiser;
pub mod error;
pub mod krylov;
pub mod metrics;
pub mod operators;
pub mod sampler;
pub mod schedule;
pub mod video;

pub use baselines::{admm_tv, standalone_cg, AdmmConfig, AdmmReport, TvAxes};
pub use denoiser::{EpsModel, ExternalDenoiser, NoisePredictor};
pub use error::{Error, Result};
pub use krylov::{cg_data_consistency, gd_data_consistency, CgReport};
pub use metrics::{inter_batch_diff, psnr, residual, ssim, MetricReport};
pub use operators::{degrade, parse_op, LinearOp, MaskMode, PsfFamily, PsfSpec};
pub use sampler::{
    blind_deblur, estimate_psf, solve, unconditional_sample, BlindResult, SolveTrace,
    SolverConfig, StepRecord, UpdateRule,
};
pub use schedule::{NoiseSchedule, StepPlan};
pub use video::{synth_video, Shape, SynthKind, VideoMeta, VideoTensor};
