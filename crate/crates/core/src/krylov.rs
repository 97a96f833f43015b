//! Data-consistency solvers.
//!
//! [`cg_data_consistency`] runs conjugate gradient on the normal equations
//! `A^T A X = A^T Y` (the CGLS recurrence), so after `l` iterations the
//! iterate minimizes `||Y - A X||` over `x_init + K_l`, the `l`-dimensional
//! Krylov subspace of `A^T A` built from the initial normal residual.
//! [`gd_data_consistency`] is the single gradient step used for ablations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::LinearOp;
use crate::video::{dot, VideoTensor};

/// Directions whose curvature `||A p||^2` falls below this are treated as
/// flat and end the iteration.
pub const BREAKDOWN_CURVATURE: f64 = 1e-30;

/// A normal residual this small relative to the initial one is at round-off
/// level; iterating further only accumulates rounding error.
pub const STAGNATION_RATIO: f64 = 64.0 * f64::EPSILON;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgReport {
    pub iterations_run: usize,
    /// `||Y - A X_k||` for `k = 0..=iterations_run`; nonincreasing.
    pub residual_norms: Vec<f64>,
    /// `||A^T (Y - A X_k)||` for the same iterates (not monotone in general).
    pub normal_residual_norms: Vec<f64>,
    pub converged: bool,
}

/// At most `l` CG iterations on the normal equations, starting at `x_init`.
/// Stops early once the normal residual drops to `tol` or to round-off level
/// ([`STAGNATION_RATIO`] times its initial value), or the search direction
/// becomes flat.
pub fn cg_data_consistency(
    a: &LinearOp,
    y: &VideoTensor,
    x_init: &VideoTensor,
    l: usize,
    tol: f64,
) -> Result<(VideoTensor, CgReport)> {
    y.ensure_shape(a.out_shape())?;
    x_init.ensure_shape(a.in_shape())?;
    if l == 0 {
        return Err(Error::InvalidParameter("CG depth must be >= 1".into()));
    }
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be >= 0")));
    }

    let mut x = x_init.as_slice().to_vec();
    let ax = a.apply_slice(&x);
    let mut r: Vec<f64> = y.as_slice().iter().zip(&ax).map(|(yi, ai)| yi - ai).collect();
    let mut s = a.adjoint_slice(&r);
    let mut p = s.clone();
    let mut gamma = dot(&s, &s);

    let mut report = CgReport {
        iterations_run: 0,
        residual_norms: vec![dot(&r, &r).sqrt()],
        normal_residual_norms: vec![gamma.sqrt()],
        converged: gamma.sqrt() <= tol,
    };
    let threshold = tol.max(STAGNATION_RATIO * gamma.sqrt());
    if !gamma.is_finite() {
        return Err(Error::NonFiniteEncountered("CG initial residual".into()));
    }

    while report.iterations_run < l && !report.converged {
        let q = a.apply_slice(&p);
        let curvature = dot(&q, &q);
        if curvature <= BREAKDOWN_CURVATURE {
            break;
        }
        let alpha = gamma / curvature;
        if !alpha.is_finite() {
            return Err(Error::NonFiniteEncountered(format!(
                "CG step size at iteration {}",
                report.iterations_run
            )));
        }
        for (xi, pi) in x.iter_mut().zip(&p) {
            *xi += alpha * pi;
        }
        for (ri, qi) in r.iter_mut().zip(&q) {
            *ri -= alpha * qi;
        }
        s = a.adjoint_slice(&r);
        let gamma_next = dot(&s, &s);
        report.iterations_run += 1;
        report.residual_norms.push(dot(&r, &r).sqrt());
        report.normal_residual_norms.push(gamma_next.sqrt());
        if !gamma_next.is_finite() {
            return Err(Error::NonFiniteEncountered(format!(
                "CG residual at iteration {}",
                report.iterations_run
            )));
        }
        report.converged = gamma_next.sqrt() <= threshold;
        let beta = gamma_next / gamma;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
        gamma = gamma_next;
    }

    Ok((VideoTensor::from_parts(a.in_shape(), x), report))
}

/// One gradient step on `||Y - A X||^2`: `x - 2 gamma A^T (A x - Y)`.
pub fn gd_data_consistency(a: &LinearOp, y: &VideoTensor, x_hat: &VideoTensor, gamma: f64) -> Result<VideoTensor> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("step size {gamma} must be > 0")));
    }
    y.ensure_shape(a.out_shape())?;
    x_hat.ensure_shape(a.in_shape())?;
    let ax = a.apply_slice(x_hat.as_slice());
    let diff: Vec<f64> = ax.iter().zip(y.as_slice()).map(|(p, q)| p - q).collect();
    let grad = a.adjoint_slice(&diff);
    let out = x_hat
        .as_slice()
        .iter()
        .zip(&grad)
        .map(|(x, g)| x - 2.0 * gamma * g)
        .collect();
    Ok(VideoTensor::from_parts(a.in_shape(), out))
}

/// Plain conjugate gradient for a symmetric positive semidefinite operator
/// given as a closure, `iters` steps from `x0`. Used by the ADMM baseline.
pub(crate) fn cg_spd(m: impl Fn(&[f64]) -> Vec<f64>, b: &[f64], x0: Vec<f64>, iters: usize) -> Result<Vec<f64>> {
    let mut x = x0;
    let mx = m(&x);
    let mut r: Vec<f64> = b.iter().zip(&mx).map(|(bi, mi)| bi - mi).collect();
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    for k in 0..iters {
        let mp = m(&p);
        let curvature = dot(&p, &mp);
        if curvature <= BREAKDOWN_CURVATURE {
            break;
        }
        let alpha = rs / curvature;
        if !alpha.is_finite() {
            return Err(Error::NonFiniteEncountered(format!("inner CG iteration {k}")));
        }
        for (xi, pi) in x.iter_mut().zip(&p) {
            *xi += alpha * pi;
        }
        for (ri, mi) in r.iter_mut().zip(&mp) {
            *ri -= alpha * mi;
        }
        let rs_next = dot(&r, &r);
        if rs_next == 0.0 {
            break;
        }
        let beta = rs_next / rs;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rs = rs_next;
    }
    Ok(x)
}
