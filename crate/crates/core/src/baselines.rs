//! Classical comparators: stand-alone CG and ADMM with total variation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krylov::{cg_data_consistency, cg_spd};
use crate::operators::LinearOp;
use crate::video::{Shape, VideoTensor};

/// CG on the normal equations from a zero start, `total_iters` steps.
pub fn standalone_cg(a: &LinearOp, y: &VideoTensor, total_iters: usize) -> Result<VideoTensor> {
    let (x, _) = cg_data_consistency(a, y, &VideoTensor::zeros(a.in_shape()), total_iters, 0.0)?;
    Ok(x)
}

/// Which axes the TV penalty differentiates along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TvAxes {
    pub temporal: bool,
    pub vertical: bool,
    pub horizontal: bool,
}

impl Default for TvAxes {
    fn default() -> Self {
        TvAxes {
            temporal: true,
            vertical: true,
            horizontal: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    pub rho: f64,
    pub lambda: f64,
    pub outer: usize,
    pub inner: usize,
    pub axes: TvAxes,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            rho: 1.0,
            lambda: 0.001,
            outer: 30,
            inner: 20,
            axes: TvAxes::default(),
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("rho {} must be > 0", self.rho)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda {} must be >= 0", self.lambda)));
        }
        if self.outer == 0 || self.inner == 0 {
            return Err(Error::InvalidParameter("ADMM iteration counts must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmReport {
    pub x: VideoTensor,
    /// Objective at `X = 0` followed by its value after every outer iteration.
    pub objective: Vec<f64>,
}

/// Forward differences along the enabled axes, stacked. The difference at
/// the last slice of each axis is zero.
#[derive(Debug, Clone, Copy)]
pub struct TvDifference {
    shape: Shape,
    /// (stride, extent) of every enabled axis
    axes: [(usize, usize); 3],
    count: usize,
}

impl TvDifference {
    pub fn new(shape: Shape, axes: TvAxes) -> Self {
        let mut list = [(0, 0); 3];
        let mut count = 0;
        for (on, stride, extent) in [
            (axes.temporal, shape.frame_len(), shape.frames),
            (axes.vertical, shape.width, shape.height),
            (axes.horizontal, 1, shape.width),
        ] {
            if on {
                list[count] = (stride, extent);
                count += 1;
            }
        }
        TvDifference {
            shape,
            axes: list,
            count,
        }
    }

    pub fn out_len(&self) -> usize {
        self.count * self.shape.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut out = vec![0.0; self.out_len()];
        for (k, &(stride, extent)) in self.axes[..self.count].iter().enumerate() {
            let block = &mut out[k * n..(k + 1) * n];
            for i in 0..n {
                if (i / stride) % extent + 1 < extent {
                    block[i] = x[i + stride] - x[i];
                }
            }
        }
        out
    }

    pub fn adjoint(&self, d: &[f64]) -> Vec<f64> {
        let n = self.shape.len();
        let mut out = vec![0.0; n];
        for (k, &(stride, extent)) in self.axes[..self.count].iter().enumerate() {
            let block = &d[k * n..(k + 1) * n];
            for i in 0..n {
                let pos = (i / stride) % extent;
                if pos + 1 < extent {
                    out[i] -= block[i];
                }
                if pos >= 1 {
                    out[i] += block[i - stride];
                }
            }
        }
        out
    }
}

/// Soft thresholding `sign(v) max(|v| - kappa, 0)`.
pub fn soft_threshold(v: f64, kappa: f64) -> f64 {
    v.signum() * (v.abs() - kappa).max(0.0)
}

/// ADMM for `0.5 ||A X - Y||^2 + lambda ||D X||_1` with the split `Z = D X`,
/// starting from `X = 0`. The X-update runs `inner` warm-started CG steps on
/// `(A^T A + rho D^T D) X = A^T Y + rho D^T (Z - U)`.
pub fn admm_tv(a: &LinearOp, y: &VideoTensor, cfg: &AdmmConfig) -> Result<AdmmReport> {
    cfg.validate()?;
    y.ensure_shape(a.out_shape())?;
    let shape = a.in_shape();
    let d = TvDifference::new(shape, cfg.axes);
    let aty = a.adjoint_slice(y.as_slice());
    let objective = |x: &[f64]| -> f64 {
        let ax = a.apply_slice(x);
        let fit: f64 = ax.iter().zip(y.as_slice()).map(|(p, q)| (p - q) * (p - q)).sum();
        let tv: f64 = d.apply(x).iter().map(|v| v.abs()).sum();
        0.5 * fit + cfg.lambda * tv
    };

    let mut x = vec![0.0; shape.len()];
    let mut z = vec![0.0; d.out_len()];
    let mut u = vec![0.0; d.out_len()];
    let mut history = vec![objective(&x)];
    let kappa = cfg.lambda / cfg.rho;

    for it in 0..cfg.outer {
        let zu: Vec<f64> = z.iter().zip(&u).map(|(zi, ui)| zi - ui).collect();
        let rhs: Vec<f64> = aty
            .iter()
            .zip(d.adjoint(&zu))
            .map(|(p, q)| p + cfg.rho * q)
            .collect();
        x = cg_spd(
            |v| {
                let ata = a.adjoint_slice(&a.apply_slice(v));
                let dtd = d.adjoint(&d.apply(v));
                ata.iter().zip(&dtd).map(|(p, q)| p + cfg.rho * q).collect()
            },
            &rhs,
            x,
            cfg.inner,
        )?;
        let dx = d.apply(&x);
        for ((zi, ui), dxi) in z.iter_mut().zip(&mut u).zip(&dx) {
            *zi = soft_threshold(dxi + *ui, kappa);
            *ui += dxi - *zi;
        }
        let obj = objective(&x);
        if !obj.is_finite() {
            return Err(Error::NonFiniteEncountered(format!("ADMM outer iteration {it}")));
        }
        history.push(obj);
    }
    Ok(AdmmReport {
        x: VideoTensor::from_parts(shape, x),
        objective: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{temporal_psf, PsfSpec};
    use crate::video::{synth_video, SynthKind};

    fn rand_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed | 1;
        (0..n)
            .map(|_| {
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect()
    }

    #[test]
    fn soft_threshold_properties() {
        for v in [-2.0, -0.5, 0.0, 0.3, 4.0] {
            assert_eq!(soft_threshold(v, 0.0), v);
        }
        assert_eq!(soft_threshold(0.0, 0.7), 0.0);
        assert_eq!(soft_threshold(0.5, 0.7), 0.0);
        assert!((soft_threshold(-1.0, 0.25) + 0.75).abs() < 1e-15);
    }

    #[test]
    fn difference_operator_adjoint() {
        let s = Shape::new(4, 2, 5, 3);
        for axes in [
            TvAxes::default(),
            TvAxes { temporal: true, vertical: false, horizontal: false },
            TvAxes { temporal: false, vertical: true, horizontal: true },
        ] {
            let d = TvDifference::new(s, axes);
            for k in 0..20 {
                let x = rand_vec(s.len(), 2 * k + 1);
                let y = rand_vec(d.out_len(), 2 * k + 2);
                let dx = d.apply(&x);
                let lhs: f64 = dx.iter().zip(&y).map(|(a, b)| a * b).sum();
                let rhs: f64 = x.iter().zip(d.adjoint(&y)).map(|(a, b)| a * b).sum();
                let scale = dx.iter().map(|v| v * v).sum::<f64>().sqrt() * y.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((lhs - rhs).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn difference_of_constant_is_zero() {
        let s = Shape::new(3, 1, 4, 4);
        let d = TvDifference::new(s, TvAxes::default());
        assert!(d.apply(&vec![0.7; s.len()]).iter().all(|&v| v == 0.0));
        // 1-D: D^T D is the Neumann Laplacian stencil
        let line = Shape::new(1, 1, 1, 4);
        let d = TvDifference::new(line, TvAxes { temporal: false, vertical: false, horizontal: true });
        let e1 = [0.0, 1.0, 0.0, 0.0];
        assert_eq!(d.adjoint(&d.apply(&e1)), vec![-1.0, 2.0, -1.0, 0.0]);
    }

    #[test]
    fn standalone_cg_identity() {
        let s = Shape::new(2, 1, 3, 3);
        let y = VideoTensor::from_vec(s, rand_vec(s.len(), 3)).unwrap();
        let x = standalone_cg(&LinearOp::identity(s).unwrap(), &y, 1).unwrap();
        assert!(x.sub(&y).unwrap().norm() < 1e-14);
    }

    #[test]
    fn constant_truth_is_a_fixed_point() {
        let s = Shape::new(4, 1, 6, 6);
        let y = VideoTensor::filled(s, 0.42);
        let rep = admm_tv(&LinearOp::identity(s).unwrap(), &y, &AdmmConfig::default()).unwrap();
        assert!(rep.x.sub(&y).unwrap().norm() / y.norm() < 1e-5);
        assert_eq!(rep.objective.len(), 31);
    }

    #[test]
    fn objective_does_not_end_above_start() {
        let s = Shape::new(8, 1, 8, 8);
        let x = synth_video(SynthKind::MovingSquare, s, 1).unwrap();
        let a = temporal_psf(s, PsfSpec::Uniform { width: 5 }).unwrap();
        let y = a.apply(&x).unwrap();
        let rep = admm_tv(&a, &y, &AdmmConfig::default()).unwrap();
        assert!(rep.objective.last().unwrap() <= &rep.objective[0]);
    }

    #[test]
    fn bad_config() {
        let s = Shape::new(1, 1, 2, 2);
        let a = LinearOp::identity(s).unwrap();
        let y = VideoTensor::zeros(s);
        for cfg in [
            AdmmConfig { rho: 0.0, ..AdmmConfig::default() },
            AdmmConfig { lambda: -1.0, ..AdmmConfig::default() },
            AdmmConfig { outer: 0, ..AdmmConfig::default() },
        ] {
            assert!(admm_tv(&a, &y, &cfg).is_err());
        }
    }
}
