use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported SVTF version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated file: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: u64, found: u64 },
    #[error("dimension {0} exceeds the 2^20 limit")]
    DimOverflow(u64),
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    UnsupportedChannels(usize),
    #[error("crop {crop} exceeds frame size {height}x{width}")]
    CropTooLarge { crop: usize, height: usize, width: usize },
    #[error("{frames} frames cannot fill a chunk of {chunk}")]
    EmptyResult { frames: usize, chunk: usize },
    #[error("bad schedule range: {0}")]
    BadRange(String),
    #[error("bad NFE {nfe} for a {t_base}-step schedule")]
    BadNfe { nfe: usize, t_base: usize },
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },
    #[error("eta {eta} too large for step {t} -> {t_prev}")]
    EtaTooLarge { eta: f64, t: usize, t_prev: usize },
    #[error("bad kernel: {0}")]
    BadKernel(String),
    #[error("factor {factor} does not divide {height}x{width}")]
    NonDivisible { factor: usize, height: usize, width: usize },
    #[error("mask ratio {0} outside (0, 1)")]
    BadRatio(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value encountered at {0}")]
    NonFiniteEncountered(String),
    #[error("empty PSF search grid")]
    EmptyGrid,
    #[error("frame {height}x{width} is smaller than the 11x11 SSIM window")]
    FrameTooSmall { height: usize, width: usize },
    #[error("inter-batch difference needs at least two frames")]
    SingleFrame,
    #[error("bad operator descriptor: {0}")]
    BadDescriptor(String),
    #[error("external denoiser timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error("protocol version mismatch: expected {expected}, peer sent {actual}")]
    ProtocolVersionMismatch { expected: u32, actual: u32 },
    #[error("external denoiser returned shape {actual}, expected {expected}")]
    ExternalShapeMismatch { expected: String, actual: String },
    #[error("external denoiser closed the connection")]
    PeerClosed,
    #[error("external denoiser protocol error: {0}")]
    ExternalProtocol(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn shape(expected: impl std::fmt::Display, actual: impl std::fmt::Display) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// True for failures originating in the external denoiser bridge.
    pub fn is_external(&self) -> bool {
        matches!(
            self,
            Error::Timeout(_)
                | Error::ProtocolVersionMismatch { .. }
                | Error::PeerClosed
                | Error::ExternalShapeMismatch { .. }
                | Error::ExternalProtocol(_)
        )
    }
}
