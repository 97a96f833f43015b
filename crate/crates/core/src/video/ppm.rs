use std::fs;
use std::io::Write;
use std::path::Path;

use super::VideoTensor;
use crate::error::{Error, Result};

/// 8-bit quantization: `round(255 * clamp(x, 0, 1))`, ties away from zero.
pub(crate) fn quantize(x: f64) -> u8 {
    (255.0 * x.clamp(0.0, 1.0)).round() as u8
}

/// Writes every frame as a binary PPM (`P6`, maxval 255) named
/// `frame_%04d.ppm`. Single-channel videos are written as gray RGB.
pub fn save_ppm_frames(v: &VideoTensor, dir: impl AsRef<Path>) -> Result<usize> {
    let s = v.shape();
    if s.channels != 1 && s.channels != 3 {
        return Err(Error::UnsupportedChannels(s.channels));
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for n in 0..s.frames {
        let mut buf = format!("P6\n{} {}\n255\n", s.width, s.height).into_bytes();
        buf.reserve(3 * s.plane_len());
        for y in 0..s.height {
            for x in 0..s.width {
                for c in 0..3 {
                    let src = if s.channels == 1 { 0 } else { c };
                    buf.push(quantize(v.get(n, src, y, x)));
                }
            }
        }
        let mut f = fs::File::create(dir.join(format!("frame_{n:04}.ppm")))?;
        f.write_all(&buf)?;
    }
    Ok(s.frames)
}
