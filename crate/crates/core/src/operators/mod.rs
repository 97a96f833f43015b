//! Linear degradation operators with exact adjoints.
//!
//! Every operator maps an input [`Shape`] to an output [`Shape`] and
//! provides `apply` and `adjoint`. Operators are immutable values; per-frame
//! work is spread over the rayon pool, and every output element is computed
//! in a fixed order so results do not depend on the thread count.

mod grammar;
mod kernels;

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::video::{Shape, VideoTensor};

pub use grammar::parse_op;
pub use kernels::{gaussian_taps, reflect_index};

/// Temporal point-spread-function family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PsfFamily {
    Uniform,
    Gaussian,
}

/// A one-dimensional temporal kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum PsfSpec {
    /// Box average over `width` frames (odd).
    Uniform { width: usize },
    /// Sampled Gaussian over `2 * ceil(3 sigma) + 1` frames.
    Gaussian { sigma: f64 },
}

impl PsfSpec {
    /// Builds a member of `family` from its scalar parameter (width for
    /// uniform, sigma for gaussian).
    pub fn from_param(family: PsfFamily, param: f64) -> Result<Self> {
        let spec = match family {
            PsfFamily::Uniform => {
                if param.fract() != 0.0 || param < 1.0 {
                    return Err(Error::BadKernel(format!("uniform width {param} is not a positive integer")));
                }
                PsfSpec::Uniform { width: param as usize }
            }
            PsfFamily::Gaussian => PsfSpec::Gaussian { sigma: param },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn family(&self) -> PsfFamily {
        match self {
            PsfSpec::Uniform { .. } => PsfFamily::Uniform,
            PsfSpec::Gaussian { .. } => PsfFamily::Gaussian,
        }
    }

    pub fn param(&self) -> f64 {
        match *self {
            PsfSpec::Uniform { width } => width as f64,
            PsfSpec::Gaussian { sigma } => sigma,
        }
    }

    pub fn support(&self) -> usize {
        match *self {
            PsfSpec::Uniform { width } => width,
            PsfSpec::Gaussian { sigma } => 2 * (3.0 * sigma).ceil() as usize + 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PsfSpec::Uniform { width } if width == 0 || width % 2 == 0 => {
                Err(Error::BadKernel(format!("uniform width {width} must be odd and >= 1")))
            }
            PsfSpec::Gaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(Error::BadKernel(format!("gaussian sigma {sigma} must be > 0")))
            }
            _ => Ok(()),
        }
    }

    /// Normalized taps, centered.
    pub fn taps(&self) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(match *self {
            PsfSpec::Uniform { width } => vec![1.0 / width as f64; width],
            PsfSpec::Gaussian { sigma } => gaussian_taps(sigma, self.support()),
        })
    }
}

impl fmt::Display for PsfSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PsfSpec::Uniform { width } => write!(f, "uniform:{width}"),
            PsfSpec::Gaussian { sigma } => write!(f, "gauss:{sigma}"),
        }
    }
}

/// Whether an inpainting mask is redrawn for every frame or shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskMode {
    #[default]
    PerFrame,
    Shared,
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Identity,
    Temporal { taps: Vec<f64> },
    SpatialBlur { taps: Vec<f64> },
    AvgPool { factor: usize },
    Diagonal { weights: Vec<f64> },
    Dense { matrix: Vec<f64> },
    Compose { outer: Box<LinearOp>, inner: Box<LinearOp> },
}

/// A linear map between video shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOp {
    in_shape: Shape,
    out_shape: Shape,
    kind: Kind,
    descriptor: String,
}

impl LinearOp {
    pub fn identity(shape: Shape) -> Result<Self> {
        shape.validate()?;
        Ok(LinearOp {
            in_shape: shape,
            out_shape: shape,
            kind: Kind::Identity,
            descriptor: "identity".into(),
        })
    }

    /// Temporal convolution with replicate padding at the clip ends:
    /// `out[n] = sum_j h[j] * x[clamp(n + j - support / 2)]`.
    pub fn temporal_psf(shape: Shape, spec: PsfSpec) -> Result<Self> {
        shape.validate()?;
        let taps = spec.taps()?;
        if taps.len() > 2 * shape.frames - 1 {
            return Err(Error::BadKernel(format!(
                "support {} exceeds 2N-1 = {}",
                taps.len(),
                2 * shape.frames - 1
            )));
        }
        Ok(LinearOp {
            in_shape: shape,
            out_shape: shape,
            kind: Kind::Temporal { taps },
            descriptor: format!("temporal:{spec}"),
        })
    }

    /// Per-frame separable Gaussian blur with symmetric (half-sample)
    /// reflection at the borders.
    pub fn spatial_gaussian_blur(shape: Shape, sigma: f64, kernel_width: usize) -> Result<Self> {
        shape.validate()?;
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::BadKernel(format!("blur sigma {sigma} must be > 0")));
        }
        if kernel_width.is_multiple_of(2) {
            return Err(Error::BadKernel(format!("kernel width {kernel_width} must be odd")));
        }
        Ok(LinearOp {
            in_shape: shape,
            out_shape: shape,
            kind: Kind::SpatialBlur {
                taps: gaussian_taps(sigma, kernel_width),
            },
            descriptor: format!("spatial:gauss:{sigma}:{kernel_width}"),
        })
    }

    /// `factor x factor` average pooling.
    pub fn avgpool_sr(shape: Shape, factor: usize) -> Result<Self> {
        shape.validate()?;
        if factor == 0 || !shape.height.is_multiple_of(factor) || !shape.width.is_multiple_of(factor) {
            return Err(Error::NonDivisible {
                factor,
                height: shape.height,
                width: shape.width,
            });
        }
        Ok(LinearOp {
            in_shape: shape,
            out_shape: Shape::new(shape.frames, shape.channels, shape.height / factor, shape.width / factor),
            kind: Kind::AvgPool { factor },
            descriptor: format!("sr:{factor}"),
        })
    }

    /// Pixel-dropping mask: exactly `round(ratio * H * W)` pixels per frame
    /// are zeroed across all channels.
    pub fn random_mask(shape: Shape, ratio: f64, seed: u64, mode: MaskMode) -> Result<Self> {
        shape.validate()?;
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::BadRatio(ratio));
        }
        let plane = shape.plane_len();
        let dropped = (ratio * plane as f64).round() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || {
            let mut idx: Vec<usize> = (0..plane).collect();
            idx.shuffle(&mut rng);
            let mut keep = vec![1.0; plane];
            for &i in &idx[..dropped] {
                keep[i] = 0.0;
            }
            keep
        };
        let shared = (mode == MaskMode::Shared).then(&mut draw);
        let mut weights = Vec::with_capacity(shape.len());
        for _ in 0..shape.frames {
            let keep = match &shared {
                Some(m) => m.clone(),
                None => draw(),
            };
            for _ in 0..shape.channels {
                weights.extend_from_slice(&keep);
            }
        }
        let suffix = if mode == MaskMode::Shared { ":shared" } else { "" };
        Ok(LinearOp {
            in_shape: shape,
            out_shape: shape,
            kind: Kind::Diagonal { weights },
            descriptor: format!("mask:{ratio}:{seed}{suffix}"),
        })
    }

    /// Elementwise scaling by `weights` (one per voxel).
    pub fn diagonal(shape: Shape, weights: Vec<f64>) -> Result<Self> {
        shape.validate()?;
        if weights.len() != shape.len() {
            return Err(Error::shape(shape.len(), weights.len()));
        }
        Ok(LinearOp {
            in_shape: shape,
            out_shape: shape,
            kind: Kind::Diagonal { weights },
            descriptor: "diag".into(),
        })
    }

    /// Explicit row-major matrix of size `out.len() x in.len()`.
    pub fn dense(in_shape: Shape, out_shape: Shape, matrix: Vec<f64>) -> Result<Self> {
        in_shape.validate()?;
        out_shape.validate()?;
        if matrix.len() != in_shape.len() * out_shape.len() {
            return Err(Error::shape(in_shape.len() * out_shape.len(), matrix.len()));
        }
        Ok(LinearOp {
            in_shape,
            out_shape,
            kind: Kind::Dense { matrix },
            descriptor: "dense".into(),
        })
    }

    /// `outer` after `inner`.
    pub fn compose(outer: LinearOp, inner: LinearOp) -> Result<Self> {
        if inner.out_shape != outer.in_shape {
            return Err(Error::shape(outer.in_shape, inner.out_shape));
        }
        match (&inner.kind, &outer.kind) {
            (Kind::Identity, _) => return Ok(outer),
            (_, Kind::Identity) => return Ok(inner),
            _ => {}
        }
        let descriptor = format!("{} | {}", inner.descriptor, outer.descriptor);
        Ok(LinearOp {
            in_shape: inner.in_shape,
            out_shape: outer.out_shape,
            kind: Kind::Compose {
                outer: Box::new(outer),
                inner: Box::new(inner),
            },
            descriptor,
        })
    }

    pub fn in_shape(&self) -> Shape {
        self.in_shape
    }

    pub fn out_shape(&self) -> Shape {
        self.out_shape
    }

    /// Canonical grammar string (`stage | stage ...`, first stage applied
    /// first).
    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn apply(&self, x: &VideoTensor) -> Result<VideoTensor> {
        x.ensure_shape(self.in_shape)?;
        Ok(VideoTensor::from_parts(self.out_shape, self.apply_slice(x.as_slice())))
    }

    pub fn adjoint(&self, y: &VideoTensor) -> Result<VideoTensor> {
        y.ensure_shape(self.out_shape)?;
        Ok(VideoTensor::from_parts(self.in_shape, self.adjoint_slice(y.as_slice())))
    }

    pub(crate) fn apply_slice(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_shape.len());
        let s = self.in_shape;
        match &self.kind {
            Kind::Identity => x.to_vec(),
            Kind::Temporal { taps } => kernels::temporal_apply(x, s, taps),
            Kind::SpatialBlur { taps } => kernels::blur(x, s, taps, false),
            Kind::AvgPool { factor } => kernels::pool(x, s, *factor),
            Kind::Diagonal { weights } => x.iter().zip(weights).map(|(a, w)| a * w).collect(),
            Kind::Dense { matrix } => {
                let n = x.len();
                matrix
                    .par_chunks(n)
                    .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
                    .collect()
            }
            Kind::Compose { outer, inner } => outer.apply_slice(&inner.apply_slice(x)),
        }
    }

    pub(crate) fn adjoint_slice(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.out_shape.len());
        let s = self.in_shape;
        match &self.kind {
            Kind::Identity => y.to_vec(),
            Kind::Temporal { taps } => kernels::temporal_adjoint(y, s, taps),
            Kind::SpatialBlur { taps } => kernels::blur(y, s, taps, true),
            Kind::AvgPool { factor } => kernels::unpool(y, s, *factor),
            Kind::Diagonal { weights } => y.iter().zip(weights).map(|(a, w)| a * w).collect(),
            Kind::Dense { matrix } => {
                let n = s.len();
                let mut out = vec![0.0; n];
                for (row, &yi) in matrix.chunks(n).zip(y) {
                    for (o, a) in out.iter_mut().zip(row) {
                        *o += a * yi;
                    }
                }
                out
            }
            Kind::Compose { outer, inner } => inner.adjoint_slice(&outer.adjoint_slice(y)),
        }
    }
}

impl fmt::Display for LinearOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} -> {})", self.descriptor, self.in_shape, self.out_shape)
    }
}

pub fn temporal_psf(shape: Shape, spec: PsfSpec) -> Result<LinearOp> {
    LinearOp::temporal_psf(shape, spec)
}

pub fn spatial_gaussian_blur(shape: Shape, sigma: f64, kernel_width: usize) -> Result<LinearOp> {
    LinearOp::spatial_gaussian_blur(shape, sigma, kernel_width)
}

pub fn avgpool_sr(shape: Shape, factor: usize) -> Result<LinearOp> {
    LinearOp::avgpool_sr(shape, factor)
}

pub fn random_mask(ratio: f64, seed: u64, shape: Shape) -> Result<LinearOp> {
    LinearOp::random_mask(shape, ratio, seed, MaskMode::PerFrame)
}

pub fn compose(outer: LinearOp, inner: LinearOp) -> Result<LinearOp> {
    LinearOp::compose(outer, inner)
}

/// `A(X) + W` with `W` i.i.d. `N(0, noise_std^2)` drawn from `seed`.
pub fn degrade(x: &VideoTensor, op: &LinearOp, noise_std: f64, seed: u64) -> Result<VideoTensor> {
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise_std {noise_std} must be >= 0")));
    }
    let mut y = op.apply(x)?;
    if noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in y.as_mut_slice() {
            let w: f64 = StandardNormal.sample(&mut rng);
            *v += noise_std * w;
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_tensor(shape: Shape, seed: u64) -> VideoTensor {
        let mut s = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
        VideoTensor::from_fn(shape, |_, _, _, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    fn assert_adjoint(op: &LinearOp, trials: u64) {
        for k in 0..trials {
            let x = lcg_tensor(op.in_shape(), 2 * k + 1);
            let y = lcg_tensor(op.out_shape(), 2 * k + 2);
            let ax = op.apply(&x).unwrap();
            let lhs = ax.dot(&y).unwrap();
            let rhs = x.dot(&op.adjoint(&y).unwrap()).unwrap();
            let scale = ax.norm() * y.norm();
            assert!((lhs - rhs).abs() <= 1e-5 * scale.max(1e-300), "{op}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn temporal_preserves_constants() {
        let s = Shape::new(16, 2, 3, 3);
        let c = VideoTensor::filled(s, 0.37);
        for spec in [PsfSpec::Uniform { width: 7 }, PsfSpec::Uniform { width: 13 }, PsfSpec::Gaussian { sigma: 1.0 }] {
            let out = temporal_psf(s, spec).unwrap().apply(&c).unwrap();
            assert!(out.as_slice().iter().all(|&v| (v - 0.37).abs() < 1e-15));
        }
    }

    #[test]
    fn temporal_impulse_response() {
        let s = Shape::new(16, 1, 1, 1);
        // frame 8 in 1-based numbering is index 7
        let x = VideoTensor::from_fn(s, |n, _, _, _| if n == 7 { 1.0 } else { 0.0 });
        let out = temporal_psf(s, PsfSpec::Uniform { width: 7 }).unwrap().apply(&x).unwrap();
        // direct summation: out[n] = sum over the 7-frame window around n
        for n in 0..16usize {
            let mut acc = 0.0;
            for j in 0..7isize {
                let src = (n as isize + j - 3).clamp(0, 15) as usize;
                acc += x.as_slice()[src] / 7.0;
            }
            assert!((out.as_slice()[n] - acc).abs() < 1e-15);
            let expected = if (4..=10).contains(&n) { 1.0 / 7.0 } else { 0.0 };
            assert!((out.as_slice()[n] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_psf_is_symmetric_and_peaked() {
        let spec = PsfSpec::Gaussian { sigma: 1.0 };
        assert_eq!(spec.support(), 7);
        let taps = spec.taps().unwrap();
        let mid = taps.len() / 2;
        assert!(taps.iter().all(|&t| t <= taps[mid]));
        for j in 0..taps.len() {
            assert_eq!(taps[j], taps[taps.len() - 1 - j]);
        }
        assert!((taps.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bad_kernels() {
        let s = Shape::new(4, 1, 4, 4);
        assert!(matches!(temporal_psf(s, PsfSpec::Uniform { width: 4 }), Err(Error::BadKernel(_))));
        assert!(matches!(temporal_psf(s, PsfSpec::Uniform { width: 9 }), Err(Error::BadKernel(_))));
        assert!(temporal_psf(s, PsfSpec::Uniform { width: 7 }).is_ok());
        assert!(matches!(temporal_psf(s, PsfSpec::Gaussian { sigma: 0.0 }), Err(Error::BadKernel(_))));
        assert!(matches!(spatial_gaussian_blur(s, 2.0, 12), Err(Error::BadKernel(_))));
        assert!(matches!(spatial_gaussian_blur(s, -1.0, 13), Err(Error::BadKernel(_))));
    }

    #[test]
    fn blur_preserves_constants() {
        let s = Shape::new(2, 3, 9, 7);
        let out = spatial_gaussian_blur(s, 2.0, 13).unwrap().apply(&VideoTensor::filled(s, 0.8)).unwrap();
        assert!(out.as_slice().iter().all(|&v| (v - 0.8).abs() < 1e-14));
    }

    #[test]
    fn blur_is_self_adjoint() {
        let s = Shape::new(2, 1, 12, 10);
        let op = spatial_gaussian_blur(s, 2.0, 13).unwrap();
        for k in 0..5 {
            let y = lcg_tensor(s, k);
            let a = op.apply(&y).unwrap();
            let b = op.adjoint(&y).unwrap();
            let diff = a.sub(&b).unwrap().norm();
            assert!(diff <= 1e-5 * a.norm(), "diff {diff}");
        }
    }

    #[test]
    fn blur_center_tap() {
        // independent evaluation of the normalized 13-tap, sigma 2 kernel
        let raw: Vec<f64> = (-6..=6).map(|d: i32| (-(d * d) as f64 / 8.0).exp()).collect();
        let center = raw[6] / raw.iter().sum::<f64>();
        assert!((center - 0.199_676_6).abs() < 1e-6, "{center}");
        let taps = gaussian_taps(2.0, 13);
        assert!((taps[6] - center).abs() < 1e-15);
        // the separable 2-D kernel center is the square
        assert!((taps[6] * taps[6] - 0.039_870_7).abs() < 1e-6);
    }

    #[test]
    fn avgpool_block_mean() {
        let s = Shape::new(1, 1, 4, 4);
        let x = VideoTensor::from_fn(s, |_, _, y, x| (y * 4 + x) as f64);
        let op = avgpool_sr(s, 4).unwrap();
        let out = op.apply(&x).unwrap();
        assert_eq!(out.shape(), Shape::new(1, 1, 1, 1));
        assert_eq!(out.as_slice(), &[7.5]);
        let c = avgpool_sr(Shape::new(2, 3, 8, 4), 2)
            .unwrap()
            .apply(&VideoTensor::filled(Shape::new(2, 3, 8, 4), 0.6))
            .unwrap();
        assert!(c.as_slice().iter().all(|&v| (v - 0.6).abs() < 1e-15));
        let adj = op.adjoint(&VideoTensor::filled(Shape::new(1, 1, 1, 1), 16.0)).unwrap();
        assert!(adj.as_slice().iter().all(|&v| v == 1.0));
        assert!(matches!(avgpool_sr(Shape::new(1, 1, 6, 8), 4), Err(Error::NonDivisible { .. })));
    }

    #[test]
    fn mask_counts_and_projection() {
        let s = Shape::new(3, 3, 16, 16);
        let op = random_mask(0.5, 42, s).unwrap();
        let ones = op.apply(&VideoTensor::filled(s, 1.0)).unwrap();
        for n in 0..3 {
            for c in 0..3 {
                let zeroed = (0..256).filter(|&i| ones.frame(n)[c * 256 + i] == 0.0).count();
                assert_eq!(zeroed, 128);
            }
            // same mask for every channel of a pixel
            assert_eq!(&ones.frame(n)[..256], &ones.frame(n)[256..512]);
        }
        // independent across frames
        assert_ne!(ones.frame(0), ones.frame(1));
        let x = lcg_tensor(s, 9);
        let once = op.apply(&x).unwrap();
        assert_eq!(op.apply(&once).unwrap(), once);
        assert_eq!(op.adjoint(&x).unwrap(), once);

        let shared = LinearOp::random_mask(s, 0.5, 42, MaskMode::Shared).unwrap();
        let ones = shared.apply(&VideoTensor::filled(s, 1.0)).unwrap();
        assert_eq!(ones.frame(0), ones.frame(2));
        assert!(matches!(random_mask(1.0, 0, s), Err(Error::BadRatio(_))));
        assert!(matches!(random_mask(0.0, 0, s), Err(Error::BadRatio(_))));
    }

    #[test]
    fn compose_laws() {
        let s = Shape::new(5, 1, 8, 8);
        let a = temporal_psf(s, PsfSpec::Uniform { width: 3 }).unwrap();
        let id = LinearOp::identity(s).unwrap();
        let c = compose(id, a.clone()).unwrap();
        let x = lcg_tensor(s, 3);
        assert_eq!(c.apply(&x).unwrap(), a.apply(&x).unwrap());
        assert_eq!(c.descriptor(), a.descriptor());

        let st = compose(spatial_gaussian_blur(s, 2.0, 13).unwrap(), a.clone()).unwrap();
        assert_eq!(st.descriptor(), "temporal:uniform:3 | spatial:gauss:2:13");
        assert_adjoint(&st, 20);

        let pool = avgpool_sr(s, 2).unwrap();
        assert!(matches!(compose(a, pool), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn every_constructor_passes_dot_product_test() {
        let s = Shape::new(6, 2, 8, 12);
        let ops = [
            LinearOp::identity(s).unwrap(),
            temporal_psf(s, PsfSpec::Uniform { width: 7 }).unwrap(),
            temporal_psf(s, PsfSpec::Gaussian { sigma: 1.0 }).unwrap(),
            spatial_gaussian_blur(s, 2.0, 13).unwrap(),
            avgpool_sr(s, 4).unwrap(),
            random_mask(0.5, 1, s).unwrap(),
        ];
        for op in &ops {
            assert_adjoint(op, 10);
        }
    }

    #[test]
    fn superposition() {
        let s = Shape::new(4, 1, 8, 8);
        let op = compose(
            avgpool_sr(s, 2).unwrap(),
            temporal_psf(s, PsfSpec::Uniform { width: 3 }).unwrap(),
        )
        .unwrap();
        let x = lcg_tensor(s, 1);
        let z = lcg_tensor(s, 2);
        let lhs = op.apply(&x.lin_comb(2.5, &z, -0.75).unwrap()).unwrap();
        let rhs = op.apply(&x).unwrap().lin_comb(2.5, &op.apply(&z).unwrap(), -0.75).unwrap();
        assert!(lhs.sub(&rhs).unwrap().norm() < 1e-12 * rhs.norm());
    }

    #[test]
    fn degrade_contracts() {
        let s = Shape::new(3, 1, 4, 4);
        let x = lcg_tensor(s, 5);
        let op = temporal_psf(s, PsfSpec::Uniform { width: 3 }).unwrap();
        assert_eq!(degrade(&x, &op, 0.0, 1).unwrap(), op.apply(&x).unwrap());
        assert_eq!(degrade(&x, &LinearOp::identity(s).unwrap(), 0.0, 1).unwrap(), x);
        let a = degrade(&x, &op, 0.1, 7).unwrap();
        assert_eq!(a, degrade(&x, &op, 0.1, 7).unwrap());
        assert_ne!(a, degrade(&x, &op, 0.1, 8).unwrap());
        assert!(degrade(&x, &avgpool_sr(Shape::new(1, 1, 4, 4), 2).unwrap(), 0.0, 0).is_err());
    }
}
