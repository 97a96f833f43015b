//! Wire format spoken with an external denoiser over its stdin/stdout.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! handshake  "HELO" u32 version            (client sends, server echoes)
//! request    "EPQ1" u32 t_index f64 abar u32 N u32 C u32 H u32 W  f32[N*C*H*W]
//! response   "EPR1" u32 status=0            u32 N u32 C u32 H u32 W  f32[N*C*H*W]
//!            "EPR1" u32 status!=0           u32 len  u8[len] (UTF-8 message)
//! ```

use std::io::{self, Read, Write};

use crate::error::{Error, Result};
use crate::video::{Shape, VideoTensor, MAX_DIM};

pub const PROTOCOL_VERSION: u32 = 1;
pub const HANDSHAKE_MAGIC: [u8; 4] = *b"HELO";
pub const REQUEST_MAGIC: [u8; 4] = *b"EPQ1";
pub const RESPONSE_MAGIC: [u8; 4] = *b"EPR1";
/// Longest error message accepted from a peer.
pub const MAX_MESSAGE_LEN: u32 = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct EpsRequest {
    pub t_index: u32,
    pub abar: f64,
    pub x_t: VideoTensor,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EpsResponse {
    Ok(VideoTensor),
    Failed { status: u32, message: String },
}

pub fn write_handshake(mut w: impl Write, version: u32) -> Result<()> {
    let mut buf = [0u8; 8];
    buf[..4].copy_from_slice(&HANDSHAKE_MAGIC);
    buf[4..].copy_from_slice(&version.to_le_bytes());
    w.write_all(&buf).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Reads a handshake and returns the version it carries.
pub fn read_handshake(mut r: impl Read) -> Result<u32> {
    expect_magic(&mut r, HANDSHAKE_MAGIC)?;
    read_u32(&mut r)
}

pub fn write_request(mut w: impl Write, req: &EpsRequest) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + 4 * req.x_t.len());
    buf.extend_from_slice(&REQUEST_MAGIC);
    buf.extend_from_slice(&req.t_index.to_le_bytes());
    buf.extend_from_slice(&req.abar.to_le_bytes());
    push_tensor(&mut buf, &req.x_t);
    w.write_all(&buf).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Reads one request. `max_elements` bounds the payload a server accepts;
/// the oversize payload is still drained so the stream stays aligned.
pub fn read_request(mut r: impl Read, max_elements: usize) -> Result<EpsRequest> {
    expect_magic(&mut r, REQUEST_MAGIC)?;
    let t_index = read_u32(&mut r)?;
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(io_err)?;
    let abar = f64::from_le_bytes(b);
    let x_t = read_tensor(&mut r, max_elements)?;
    Ok(EpsRequest { t_index, abar, x_t })
}

pub fn write_response(mut w: impl Write, rsp: &EpsResponse) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&RESPONSE_MAGIC);
    match rsp {
        EpsResponse::Ok(v) => {
            buf.extend_from_slice(&0u32.to_le_bytes());
            push_tensor(&mut buf, v);
        }
        EpsResponse::Failed { status, message } => {
            buf.extend_from_slice(&(*status).max(1).to_le_bytes());
            buf.extend_from_slice(&(message.len() as u32).to_le_bytes());
            buf.extend_from_slice(message.as_bytes());
        }
    }
    w.write_all(&buf).map_err(io_err)?;
    w.flush().map_err(io_err)
}

pub fn read_response(mut r: impl Read, max_elements: usize) -> Result<EpsResponse> {
    expect_magic(&mut r, RESPONSE_MAGIC)?;
    let status = read_u32(&mut r)?;
    if status == 0 {
        return Ok(EpsResponse::Ok(read_tensor(&mut r, max_elements)?));
    }
    let len = read_u32(&mut r)?;
    if len > MAX_MESSAGE_LEN {
        return Err(Error::ExternalProtocol(format!("error message of {len} bytes")));
    }
    let mut msg = vec![0u8; len as usize];
    r.read_exact(&mut msg).map_err(io_err)?;
    Ok(EpsResponse::Failed {
        status,
        message: String::from_utf8_lossy(&msg).into_owned(),
    })
}

fn push_tensor(buf: &mut Vec<u8>, v: &VideoTensor) {
    let s = v.shape();
    for d in [s.frames, s.channels, s.height, s.width] {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &x in v.as_slice() {
        buf.extend_from_slice(&(x as f32).to_le_bytes());
    }
}

fn read_tensor(r: &mut impl Read, max_elements: usize) -> Result<VideoTensor> {
    let mut dims = [0u32; 4];
    for d in &mut dims {
        *d = read_u32(r)?;
    }
    if dims.iter().any(|&d| d == 0 || u64::from(d) > MAX_DIM) {
        return Err(Error::ExternalProtocol(format!("invalid dims {dims:?}")));
    }
    let count: u128 = dims.iter().map(|&d| u128::from(d)).product();
    if count > max_elements as u128 {
        // drain so the next message starts on a boundary
        io::copy(&mut r.take((4 * count) as u64), &mut io::sink()).map_err(io_err)?;
        return Err(Error::ExternalProtocol(format!(
            "payload of {count} elements exceeds limit {max_elements}"
        )));
    }
    let shape = Shape::new(dims[0] as usize, dims[1] as usize, dims[2] as usize, dims[3] as usize);
    let mut bytes = vec![0u8; 4 * shape.len()];
    r.read_exact(&mut bytes).map_err(io_err)?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    VideoTensor::from_vec(shape, data).map_err(|e| Error::ExternalProtocol(e.to_string()))
}

fn expect_magic(r: &mut impl Read, magic: [u8; 4]) -> Result<()> {
    let mut got = [0u8; 4];
    r.read_exact(&mut got).map_err(io_err)?;
    if got != magic {
        return Err(Error::ExternalProtocol(format!(
            "expected magic {:?}, got {:?}",
            String::from_utf8_lossy(&magic),
            String::from_utf8_lossy(&got)
        )));
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(u32::from_le_bytes(b))
}

fn io_err(e: io::Error) -> Error {
    match e.kind() {
        io::ErrorKind::UnexpectedEof | io::ErrorKind::BrokenPipe | io::ErrorKind::ConnectionReset => {
            Error::PeerClosed
        }
        _ => Error::Io(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor() -> VideoTensor {
        VideoTensor::from_fn(Shape::new(2, 1, 2, 3), |n, _, y, x| (n * 6 + y * 3 + x) as f64 * 0.25)
    }

    #[test]
    fn request_layout() {
        let req = EpsRequest {
            t_index: 950,
            abar: 0.5,
            x_t: tensor(),
        };
        let mut buf = Vec::new();
        write_request(&mut buf, &req).unwrap();
        assert_eq!(&buf[..4], b"EPQ1");
        assert_eq!(&buf[4..8], &950u32.to_le_bytes());
        assert_eq!(&buf[8..16], &0.5f64.to_le_bytes());
        assert_eq!(&buf[16..20], &2u32.to_le_bytes());
        assert_eq!(&buf[28..32], &3u32.to_le_bytes());
        assert_eq!(buf.len(), 32 + 4 * 12);
        assert_eq!(read_request(&buf[..], 1 << 20).unwrap(), req);
    }

    #[test]
    fn responses_round_trip() {
        for rsp in [
            EpsResponse::Ok(tensor()),
            EpsResponse::Failed {
                status: 3,
                message: "model exploded".into(),
            },
        ] {
            let mut buf = Vec::new();
            write_response(&mut buf, &rsp).unwrap();
            assert_eq!(&buf[..4], b"EPR1");
            assert_eq!(read_response(&buf[..], 1 << 20).unwrap(), rsp);
        }
    }

    #[test]
    fn handshake() {
        let mut buf = Vec::new();
        write_handshake(&mut buf, PROTOCOL_VERSION).unwrap();
        assert_eq!(buf, b"HELO\x01\x00\x00\x00");
        assert_eq!(read_handshake(&buf[..]).unwrap(), 1);
    }

    #[test]
    fn oversize_request_is_drained() {
        let req = EpsRequest {
            t_index: 1,
            abar: 0.9,
            x_t: tensor(),
        };
        let mut buf = Vec::new();
        write_request(&mut buf, &req).unwrap();
        write_request(&mut buf, &req).unwrap();
        let mut cursor = &buf[..];
        assert!(matches!(read_request(&mut cursor, 4), Err(Error::ExternalProtocol(_))));
        assert_eq!(read_request(&mut cursor, 100).unwrap(), req);
    }

    #[test]
    fn truncated_stream_is_peer_closed() {
        let mut buf = Vec::new();
        write_response(&mut buf, &EpsResponse::Ok(tensor())).unwrap();
        assert!(matches!(read_response(&buf[..20], 100), Err(Error::PeerClosed)));
        assert!(matches!(read_response(&b"EPQ1"[..], 100), Err(Error::ExternalProtocol(_))));
    }
}
