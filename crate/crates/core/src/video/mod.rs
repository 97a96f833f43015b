//! The spatio-temporal volume type and its I/O.
//!
//! A [`VideoTensor`] holds `N` frames of `C` channels at `H x W` pixels in
//! frame-major, then channel, row, column order. Values are kept as `f64` in
//! memory; the on-disk SVTF format stores `f32`.

mod ppm;
mod preprocess;
mod svtf;
mod synth;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ppm::save_ppm_frames;
pub use preprocess::{preprocess, Preprocess};
pub use svtf::{load_svtf, read_svtf, save_svtf, write_svtf, MAX_DIM, SVTF_MAGIC, SVTF_VERSION};
pub use synth::{synth_video, SynthKind};

/// Dimensions of a video volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub frames: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(frames: usize, channels: usize, height: usize, width: usize) -> Self {
        Shape {
            frames,
            channels,
            height,
            width,
        }
    }

    pub fn len(&self) -> usize {
        self.frames * self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Elements in one frame (`C * H * W`).
    pub fn frame_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn with_frames(self, frames: usize) -> Self {
        Shape { frames, ..self }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.frames == 0 || self.channels == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::InvalidShape(format!("all dimensions must be >= 1, got {self}")));
        }
        Ok(())
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{}x{}x{}",
            self.frames, self.channels, self.height, self.width
        )
    }
}

/// Descriptive metadata carried alongside a video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub source_id: String,
    pub frame_rate: Option<f64>,
    pub value_range: (f64, f64),
}

impl VideoMeta {
    pub fn new(source_id: impl Into<String>, value_range: (f64, f64)) -> Result<Self> {
        let (lo, hi) = value_range;
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::InvalidParameter(format!(
                "value range ({lo}, {hi}) must satisfy lo < hi"
            )));
        }
        Ok(VideoMeta {
            source_id: source_id.into(),
            frame_rate: None,
            value_range,
        })
    }
}

impl Default for VideoMeta {
    fn default() -> Self {
        VideoMeta {
            source_id: String::new(),
            frame_rate: None,
            value_range: (0.0, 255.0),
        }
    }
}

/// An `N x C x H x W` video volume.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl VideoTensor {
    /// Builds a tensor, rejecting empty dimensions, length mismatches and
    /// non-finite values.
    pub fn from_vec(shape: Shape, data: Vec<f64>) -> Result<Self> {
        shape.validate()?;
        if data.len() != shape.len() {
            return Err(Error::shape(
                format!("{} elements for {shape}", shape.len()),
                format!("{} elements", data.len()),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEncountered(format!("element {pos}")));
        }
        Ok(VideoTensor { shape, data })
    }

    /// Internal constructor for buffers already known to be well formed.
    pub(crate) fn from_parts(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.len(), data.len());
        VideoTensor { shape, data }
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        VideoTensor {
            shape,
            data: vec![value; shape.len()],
        }
    }

    /// Builds a tensor from a function of `(frame, channel, row, col)`.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for n in 0..shape.frames {
            for c in 0..shape.channels {
                for y in 0..shape.height {
                    for x in 0..shape.width {
                        data.push(f(n, c, y, x));
                    }
                }
            }
        }
        VideoTensor { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn frame(&self, n: usize) -> &[f64] {
        let fl = self.shape.frame_len();
        &self.data[n * fl..(n + 1) * fl]
    }

    pub fn index(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        let s = self.shape;
        ((n * s.channels + c) * s.height + y) * s.width + x
    }

    pub fn get(&self, n: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(n, c, y, x)]
    }

    /// Copies frames `start..start + count` into a new tensor.
    pub fn slice_frames(&self, start: usize, count: usize) -> Result<Self> {
        if count == 0 || start + count > self.shape.frames {
            return Err(Error::InvalidParameter(format!(
                "frame range {start}..{} outside 0..{}",
                start + count,
                self.shape.frames
            )));
        }
        let fl = self.shape.frame_len();
        Ok(VideoTensor {
            shape: self.shape.with_frames(count),
            data: self.data[start * fl..(start + count) * fl].to_vec(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn ensure_shape(&self, expected: Shape) -> Result<()> {
        if self.shape != expected {
            return Err(Error::shape(expected, self.shape));
        }
        Ok(())
    }

    pub(crate) fn ensure_finite(&self, context: impl FnOnce() -> String) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFiniteEncountered(context()))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        VideoTensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &VideoTensor, b: f64) -> Result<Self> {
        other.ensure_shape(self.shape)?;
        Ok(VideoTensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&x, &y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn sub(&self, other: &VideoTensor) -> Result<Self> {
        self.lin_comb(1.0, other, -1.0)
    }

    pub fn dot(&self, other: &VideoTensor) -> Result<f64> {
        other.ensure_shape(self.shape)?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Self {
        self.map(|v| v.clamp(lo, hi))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
