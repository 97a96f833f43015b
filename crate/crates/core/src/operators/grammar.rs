//! Textual operator descriptors.
//!
//! ```text
//! op     := stage ( "|" stage )*
//! stage  := "identity"
//!         | "temporal:uniform:" width | "temporal:gauss:" sigma
//!         | "spatial:gauss:" sigma ":" width
//!         | "sr:" factor
//!         | "mask:" ratio ":" seed [ ":shared" ]
//! ```
//!
//! Stages run left to right, so `temporal:uniform:7 | sr:4` blurs in time
//! and then pools.

use std::str::FromStr;

use super::{LinearOp, MaskMode, PsfSpec};
use crate::error::{Error, Result};
use crate::video::Shape;

pub fn parse_op(descriptor: &str, in_shape: Shape) -> Result<LinearOp> {
    let stages: Vec<&str> = descriptor.split('|').map(str::trim).collect();
    if stages.iter().any(|s| s.is_empty()) {
        return Err(Error::BadDescriptor(format!("empty stage in {descriptor:?}")));
    }
    let mut op = LinearOp::identity(in_shape)?;
    for stage in stages {
        let next = parse_stage(stage, op.out_shape())?;
        op = LinearOp::compose(next, op)?;
    }
    Ok(op)
}

fn parse_stage(stage: &str, shape: Shape) -> Result<LinearOp> {
    let parts: Vec<&str> = stage.split(':').map(str::trim).collect();
    let bad = || Error::BadDescriptor(format!("cannot parse stage {stage:?}"));
    match parts.as_slice() {
        ["identity"] => LinearOp::identity(shape),
        ["temporal", "uniform", width] => {
            LinearOp::temporal_psf(shape, PsfSpec::Uniform { width: num(width, stage)? })
        }
        ["temporal", "gauss" | "gaussian", sigma] => {
            LinearOp::temporal_psf(shape, PsfSpec::Gaussian { sigma: num(sigma, stage)? })
        }
        ["spatial", "gauss" | "gaussian", sigma, width] => {
            LinearOp::spatial_gaussian_blur(shape, num(sigma, stage)?, num(width, stage)?)
        }
        ["sr", factor] => LinearOp::avgpool_sr(shape, num(factor, stage)?),
        ["mask", ratio, seed] => {
            LinearOp::random_mask(shape, num(ratio, stage)?, num(seed, stage)?, MaskMode::PerFrame)
        }
        ["mask", ratio, seed, "shared"] => {
            LinearOp::random_mask(shape, num(ratio, stage)?, num(seed, stage)?, MaskMode::Shared)
        }
        _ => Err(bad()),
    }
}

fn num<T: FromStr>(s: &str, stage: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::BadDescriptor(format!("bad number {s:?} in stage {stage:?}")))
}
