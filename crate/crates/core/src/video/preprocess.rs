use super::{Shape, VideoTensor};
use crate::error::{Error, Result};

/// Ingestion settings: center crop, square resize, normalization and
/// fixed-length chunking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preprocess {
    pub crop: usize,
    pub out_size: usize,
    pub chunk: usize,
    /// Raw value range mapped onto `[0, 1]`.
    pub value_range: (f64, f64),
}

impl Default for Preprocess {
    fn default() -> Self {
        Preprocess {
            crop: 480,
            out_size: 256,
            chunk: 16,
            value_range: (0.0, 255.0),
        }
    }
}

/// Center-crops, resizes (bilinear, half-pixel centers), normalizes and
/// splits a raw video into chunks of `cfg.chunk` frames. Trailing frames
/// that do not fill a chunk are dropped.
pub fn preprocess(frames: &VideoTensor, cfg: &Preprocess) -> Result<Vec<VideoTensor>> {
    let s = frames.shape();
    if cfg.crop == 0 || cfg.crop > s.height.min(s.width) {
        return Err(Error::CropTooLarge {
            crop: cfg.crop,
            height: s.height,
            width: s.width,
        });
    }
    if cfg.chunk == 0 || cfg.out_size == 0 {
        return Err(Error::InvalidParameter(
            "chunk and out_size must be >= 1".into(),
        ));
    }
    let (lo, hi) = cfg.value_range;
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(Error::InvalidParameter(format!(
            "value range ({lo}, {hi}) must satisfy lo < hi"
        )));
    }
    let n_chunks = s.frames / cfg.chunk;
    if n_chunks == 0 {
        return Err(Error::EmptyResult {
            frames: s.frames,
            chunk: cfg.chunk,
        });
    }

    let top = (s.height - cfg.crop) / 2;
    let left = (s.width - cfg.crop) / 2;
    let taps = resize_taps(cfg.crop, cfg.out_size);
    let span = hi - lo;
    let out_shape = Shape::new(cfg.chunk, s.channels, cfg.out_size, cfg.out_size);

    let mut chunks = Vec::with_capacity(n_chunks);
    for k in 0..n_chunks {
        let chunk = VideoTensor::from_fn(out_shape, |n, c, y, x| {
            let frame = k * cfg.chunk + n;
            let (y0, y1, wy) = taps[y];
            let (x0, x1, wx) = taps[x];
            let at = |yy: usize, xx: usize| frames.get(frame, c, top + yy, left + xx);
            let top_row = (1.0 - wx) * at(y0, x0) + wx * at(y0, x1);
            let bottom_row = (1.0 - wx) * at(y1, x0) + wx * at(y1, x1);
            let v = (1.0 - wy) * top_row + wy * bottom_row;
            ((v - lo) / span).clamp(0.0, 1.0)
        });
        chunks.push(chunk);
    }
    Ok(chunks)
}

/// For each output coordinate: the two source indices and the weight of the
/// second one.
fn resize_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = pos.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, pos - i0 as f64)
        })
        .collect()
}
