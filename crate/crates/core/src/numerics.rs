//! Scalar and small-vector numerics shared by every layer: bracketing root
//! finder, adaptive Simpson quadrature, central-difference Jacobians and the
//! tolerance bundle.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Depth cap for [`integrate`].
pub const MAX_QUAD_DEPTH: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Identity checks (map equalities, round trips).
    pub eq_tol: f64,
    /// Fixed points and eigen residuals.
    pub fix_tol: f64,
    /// Integrals.
    pub quad_tol: f64,
    /// Finite-difference step.
    pub fd_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { eq_tol: 1e-9, fix_tol: 1e-12, quad_tol: 1e-8, fd_step: 1e-6 }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("eq_tol", self.eq_tol),
            ("fix_tol", self.fix_tol),
            ("quad_tol", self.quad_tol),
            ("fd_step", self.fd_step),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidTolerances(format!("{name} = {v} must be > 0")));
            }
        }
        if self.fd_step * self.fd_step <= f64::EPSILON {
            return Err(Error::InvalidTolerances(format!(
                "fd_step^2 = {} must exceed machine epsilon",
                self.fd_step * self.fd_step
            )));
        }
        Ok(())
    }
}

/// Bisection on a sign-changing bracket. Stops when the bracket is narrower
/// than `tol` (or an exact zero is hit) and returns the midpoint.
pub fn bisect<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (lo.min(hi), lo.max(hi));
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo * f_hi > 0.0 || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let f_lo = f(lo);
    let f_hi = f(hi);
    let mid = 0.5 * (lo + hi);
    let f_mid = f(mid);
    let whole = simpson(lo, hi, f_lo, f_mid, f_hi);
    let v = simpson_step(&f, lo, hi, f_lo, f_mid, f_hi, whole, tol, MAX_QUAD_DEPTH)?;
    Ok(sign * v)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::MaxDepth { a, b, depth: MAX_QUAD_DEPTH });
    }
    let l = simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let r = simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Ok(l + r)
}

/// Central-difference Jacobian, column `j` = (map(p + h e_j) - map(p - h e_j)) / 2h.
pub fn jacobian_fd<F: Fn(Vector3<f64>) -> Vector3<f64>>(map: F, p: Vector3<f64>, h: f64) -> Matrix3<f64> {
    let mut jac = Matrix3::zeros();
    for j in 0..3 {
        let mut step = Vector3::zeros();
        step[j] = h;
        let col = (map(p + step) - map(p - step)) / (2.0 * h);
        jac.set_column(j, &col);
    }
    jac
}

/// Representative of `x - reference` in [-1/2, 1/2): the shortest periodic
/// displacement on the unit circle.
pub fn wrap_delta(x: f64, reference: f64) -> f64 {
    let d = x - reference;
    d - (d + 0.5).floor()
}

/// Eigenvalues of a real 2x2 matrix as (re, im) pairs.
pub fn eigenvalues_2x2(m: [[f64; 2]; 2]) -> [(f64, f64); 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = 0.25 * tr * tr - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [(0.5 * tr + s, 0.0), (0.5 * tr - s, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [(0.5 * tr, s), (0.5 * tr, -s)]
    }
}
