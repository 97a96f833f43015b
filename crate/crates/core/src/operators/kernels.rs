use rayon::prelude::*;

use crate::video::Shape;

/// Normalized samples of `exp(-d^2 / 2 sigma^2)` for `d` in
/// `-(width / 2)..=width / 2`.
pub fn gaussian_taps(sigma: f64, width: usize) -> Vec<f64> {
    let r = (width / 2) as isize;
    let raw: Vec<f64> = (-r..=r)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`),
/// valid for any offset.
pub fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

fn replicate_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

pub(super) fn temporal_apply(x: &[f64], s: Shape, taps: &[f64]) -> Vec<f64> {
    let fl = s.frame_len();
    let r = (taps.len() / 2) as isize;
    let mut out = vec![0.0; x.len()];
    out.par_chunks_mut(fl).enumerate().for_each(|(n, dst)| {
        for (j, &h) in taps.iter().enumerate() {
            let src = replicate_index(n as isize + j as isize - r, s.frames);
            for (d, v) in dst.iter_mut().zip(&x[src * fl..(src + 1) * fl]) {
                *d += h * v;
            }
        }
    });
    out
}

pub(super) fn temporal_adjoint(y: &[f64], s: Shape, taps: &[f64]) -> Vec<f64> {
    let fl = s.frame_len();
    let r = (taps.len() / 2) as isize;
    let mut out = vec![0.0; y.len()];
    // gather form of the transpose: frame m collects every (n, j) that read it
    out.par_chunks_mut(fl).enumerate().for_each(|(m, dst)| {
        for n in 0..s.frames {
            for (j, &h) in taps.iter().enumerate() {
                if replicate_index(n as isize + j as isize - r, s.frames) == m {
                    for (d, v) in dst.iter_mut().zip(&y[n * fl..(n + 1) * fl]) {
                        *d += h * v;
                    }
                }
            }
        }
    });
    out
}

/// Separable blur of every plane. With `transpose`, applies the exact
/// transpose of the forward map.
pub(super) fn blur(x: &[f64], s: Shape, taps: &[f64], transpose: bool) -> Vec<f64> {
    let (h, w) = (s.height, s.width);
    let mut out = vec![0.0; x.len()];
    out.par_chunks_mut(h * w)
        .zip(x.par_chunks(h * w))
        .for_each(|(dst, src)| {
            if transpose {
                let tmp = pass(src, h, w, taps, Axis::Rows, true);
                dst.copy_from_slice(&pass(&tmp, h, w, taps, Axis::Cols, true));
            } else {
                let tmp = pass(src, h, w, taps, Axis::Cols, false);
                dst.copy_from_slice(&pass(&tmp, h, w, taps, Axis::Rows, false));
            }
        });
    out
}

#[derive(Clone, Copy)]
enum Axis {
    /// Along x within each row.
    Cols,
    /// Along y within each column.
    Rows,
}

fn pass(src: &[f64], h: usize, w: usize, taps: &[f64], axis: Axis, transpose: bool) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            for (k, &t) in taps.iter().enumerate() {
                let off = k as isize - r;
                let j = match axis {
                    Axis::Cols => y * w + reflect_index(x as isize + off, w),
                    Axis::Rows => reflect_index(y as isize + off, h) * w + x,
                };
                if transpose {
                    out[j] += t * src[i];
                } else {
                    out[i] += t * src[j];
                }
            }
        }
    }
    out
}

pub(super) fn pool(x: &[f64], s: Shape, f: usize) -> Vec<f64> {
    let (h, w) = (s.height, s.width);
    let (oh, ow) = (h / f, w / f);
    let norm = 1.0 / (f * f) as f64;
    let mut out = vec![0.0; x.len() / (f * f)];
    out.par_chunks_mut(oh * ow)
        .zip(x.par_chunks(h * w))
        .for_each(|(dst, src)| {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for dy in 0..f {
                        let row = (oy * f + dy) * w + ox * f;
                        acc += src[row..row + f].iter().sum::<f64>();
                    }
                    dst[oy * ow + ox] = acc * norm;
                }
            }
        });
    out
}

pub(super) fn unpool(y: &[f64], s: Shape, f: usize) -> Vec<f64> {
    let (h, w) = (s.height, s.width);
    let (oh, ow) = (h / f, w / f);
    let norm = 1.0 / (f * f) as f64;
    let mut out = vec![0.0; s.len()];
    out.par_chunks_mut(h * w)
        .zip(y.par_chunks(oh * ow))
        .for_each(|(dst, src)| {
            for yy in 0..h {
                for xx in 0..w {
                    dst[yy * w + xx] = src[(yy / f) * ow + xx / f] * norm;
                }
            }
        });
    out
}
