//! SVTF: a minimal binary container for video tensors.
//!
//! Layout, all little-endian: magic `b"SVTF"`, `u32` version (1), `u32`
//! N, C, H, W, then `N*C*H*W` `f32` values.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{Shape, VideoTensor};
use crate::error::{Error, Result};

pub const SVTF_MAGIC: [u8; 4] = *b"SVTF";
pub const SVTF_VERSION: u32 = 1;
/// Largest accepted value for any single dimension.
pub const MAX_DIM: u64 = 1 << 20;

const HEADER_LEN: usize = 4 + 4 + 16;

pub fn save_svtf(v: &VideoTensor, path: impl AsRef<Path>) -> Result<()> {
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    write_svtf(v, &mut file)?;
    file.flush()?;
    Ok(())
}

pub fn write_svtf(v: &VideoTensor, mut w: impl Write) -> Result<()> {
    let s = v.shape();
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(&SVTF_MAGIC);
    header.extend_from_slice(&SVTF_VERSION.to_le_bytes());
    for d in [s.frames, s.channels, s.height, s.width] {
        header.extend_from_slice(&(d as u32).to_le_bytes());
    }
    w.write_all(&header)?;
    let mut payload = Vec::with_capacity(v.len() * 4);
    for &x in v.as_slice() {
        payload.extend_from_slice(&(x as f32).to_le_bytes());
    }
    w.write_all(&payload)?;
    Ok(())
}

pub fn load_svtf(path: impl AsRef<Path>) -> Result<VideoTensor> {
    let bytes = fs::read(path)?;
    parse(&bytes)
}

pub fn read_svtf(mut r: impl Read) -> Result<VideoTensor> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    parse(&bytes)
}

fn parse(bytes: &[u8]) -> Result<VideoTensor> {
    if bytes.len() < 4 {
        return Err(Error::TruncatedFile {
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != SVTF_MAGIC {
        return Err(Error::BadMagic {
            expected: SVTF_MAGIC,
            found: magic,
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedFile {
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let version = word(0);
    if version != SVTF_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let dims = [word(1), word(2), word(3), word(4)];
    for &d in &dims {
        if u64::from(d) > MAX_DIM {
            return Err(Error::DimOverflow(u64::from(d)));
        }
    }
    // each dim <= 2^20, so the product fits in u128 and the byte count is exact
    let count: u128 = dims.iter().map(|&d| u128::from(d)).product();
    let expected = HEADER_LEN as u128 + 4 * count;
    if (bytes.len() as u128) < expected {
        return Err(Error::TruncatedFile {
            expected: u64::try_from(expected).unwrap_or(u64::MAX),
            found: bytes.len() as u64,
        });
    }
    let shape = Shape::new(
        dims[0] as usize,
        dims[1] as usize,
        dims[2] as usize,
        dims[3] as usize,
    );
    let data = bytes[HEADER_LEN..HEADER_LEN + 4 * shape.len()]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    VideoTensor::from_vec(shape, data)
}
