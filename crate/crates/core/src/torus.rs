//! The 2-torus layer: Anosov automorphism, surgery chart around the fixed
//! point O, the sigmoid and blend maps, and the DA maps.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::numerics::bisect;
use crate::system::{CompositionOrder, SurgerySystem};

/// Integer 2x2 matrix with det 1 and trace > 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HyperbolicMatrix {
    entries: [[i64; 2]; 2],
}

impl HyperbolicMatrix {
    pub fn new(entries: [[i64; 2]; 2]) -> Result<Self> {
        let [[a, b], [c, d]] = entries;
        let det = a * d - b * c;
        if det != 1 {
            return Err(Error::NotUnimodular { det });
        }
        let trace = a + d;
        if trace.abs() <= 2 {
            return Err(Error::NotHyperbolic { trace });
        }
        if trace < 0 {
            return Err(Error::NegativeTrace { trace });
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> [[i64; 2]; 2] {
        self.entries
    }

    pub fn trace(&self) -> i64 {
        self.entries[0][0] + self.entries[1][1]
    }

    pub fn inverse(&self) -> Self {
        let [[a, b], [c, d]] = self.entries;
        Self { entries: [[d, -b], [-c, a]] }
    }

    pub fn as_f64(&self) -> Matrix2<f64> {
        let [[a, b], [c, d]] = self.entries;
        Matrix2::new(a as f64, b as f64, c as f64, d as f64)
    }
}

/// Expanding eigenvalue and unit eigendirections of a hyperbolic matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnosovData {
    pub lambda: f64,
    pub v_u: Vector2<f64>,
    pub v_s: Vector2<f64>,
}

/// Unit eigenvector of the integer matrix for eigenvalue `ev`, first
/// nonzero component made positive.
fn eigvec(m: [[i64; 2]; 2], ev: f64) -> Vector2<f64> {
    let [[a, b], [c, d]] = m;
    let (a, b, c, d) = (a as f64, b as f64, c as f64, d as f64);
    let v = if b.abs() >= c.abs() { Vector2::new(b, ev - a) } else { Vector2::new(ev - d, c) };
    let v = v.normalize();
    if v.x < 0.0 || (v.x == 0.0 && v.y < 0.0) {
        -v
    } else {
        v
    }
}

pub fn eigen_data(c: &HyperbolicMatrix) -> AnosovData {
    let tr = c.trace() as f64;
    let lambda = 0.5 * (tr + (tr * tr - 4.0).sqrt());
    AnosovData { lambda, v_u: eigvec(c.entries, lambda), v_s: eigvec(c.entries, 1.0 / lambda) }
}

/// Builds the matrix after validation; the usual entry point for raw entries.
pub fn eigen_data_checked(entries: [[i64; 2]; 2]) -> Result<AnosovData> {
    Ok(eigen_data(&HyperbolicMatrix::new(entries)?))
}

/// Point of T² reduced to [0,1)².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusPoint {
    pub u: f64,
    pub v: f64,
}

fn reduce(x: f64) -> f64 {
    let r = x - x.floor();
    // tiny negatives round up to 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl TorusPoint {
    pub const ORIGIN: TorusPoint = TorusPoint { u: 0.0, v: 0.0 };

    pub fn new(u: f64, v: f64) -> Self {
        Self { u: reduce(u), v: reduce(v) }
    }

    /// Shortest displacement from `other` to `self` on the torus.
    pub fn delta(&self, other: &TorusPoint) -> Vector2<f64> {
        let w = |a: f64, b: f64| {
            let d = a - b;
            d - d.round()
        };
        Vector2::new(w(self.u, other.u), w(self.v, other.v))
    }

    pub fn dist(&self, other: &TorusPoint) -> f64 {
        self.delta(other).norm()
    }
}

fn mat_apply(m: [[i64; 2]; 2], p: TorusPoint) -> TorusPoint {
    let [[a, b], [c, d]] = m;
    TorusPoint::new(a as f64 * p.u + b as f64 * p.v, c as f64 * p.u + d as f64 * p.v)
}

pub fn anosov_apply(c: &HyperbolicMatrix, p: TorusPoint) -> TorusPoint {
    mat_apply(c.entries, p)
}

pub fn anosov_inverse(c: &HyperbolicMatrix, p: TorusPoint) -> TorusPoint {
    mat_apply(c.inverse().entries, p)
}

/// Blend weight: 0 below λ⁻³, 1 above 1, logistic in between.
pub fn sigmoid(lambda: f64, x: f64) -> f64 {
    let a = lambda.powi(-3);
    if x <= a {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let e = (0.5 * (a + 1.0) - x) / ((x - a).powi(2) * (x - 1.0).powi(2));
    1.0 / (1.0 + e.exp())
}

/// Inverse of [`nu`] in closed form: y/λ² near 0, identity beyond 1, and a
/// sigmoid blend of the two on (λ⁻¹, 1).
pub fn nu_inv(lambda: f64, y: f64) -> f64 {
    let ay = y.abs();
    let l1 = 1.0 / lambda;
    let l2 = l1 * l1;
    let v = if ay <= l1 {
        ay * l2
    } else if ay >= 1.0 {
        ay
    } else {
        let l3 = l2 * l1;
        let s = sigmoid(lambda, l3 + (ay - l1) * (1.0 - l3) / (1.0 - l1));
        s * ay + (1.0 - s) * ay * l2
    };
    v.copysign(y)
}

/// Odd, strictly increasing, λ²x on [0, λ⁻³] and identity on [1, 2].
pub fn nu(lambda: f64, x: f64) -> Result<f64> {
    if x.abs() > 2.0 {
        return Err(Error::OutOfDomain { value: x, lo: -2.0, hi: 2.0 });
    }
    Ok(nu_unchecked(lambda, x))
}

pub(crate) fn nu_unchecked(lambda: f64, x: f64) -> f64 {
    let ax = x.abs();
    let l3 = lambda.powi(-3);
    let v = if ax <= l3 {
        lambda * lambda * ax
    } else if ax >= 1.0 {
        ax
    } else {
        // nu_inv maps [1/λ, 1] onto [λ⁻³, 1]
        bisect(|y| nu_inv(lambda, y) - ax, 1.0 / lambda, 1.0, 1e-16).unwrap_or(ax)
    };
    v.copysign(x)
}

/// ν = σ(x)x + (1 − σ(x))λ²x as a direct formula. Kept for comparison: it is
/// not monotone, which is why [`nu`] blends on the inverse side instead.
pub fn nu_literal(lambda: f64, x: f64) -> f64 {
    let ax = x.abs();
    let s = sigmoid(lambda, ax);
    (s * ax + (1.0 - s) * lambda * lambda * ax).copysign(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlendKind {
    A,
    R,
    /// t·B_R + (1−t)·B_A, t ∈ [0,1].
    Blend(f64),
}

const DISK_R2: f64 = 4.0;

fn check_disk(x: f64, y: f64) -> Result<()> {
    if x * x + y * y > DISK_R2 * (1.0 + 1e-12) {
        return Err(Error::OutOfDisk { x, y });
    }
    Ok(())
}

fn gamma_a(lambda: f64, x: f64, y: f64) -> f64 {
    let ay = y.abs();
    if ay <= lambda.powi(-3) {
        nu_unchecked(lambda, x)
    } else if ay <= 1.0 {
        let s = sigmoid(lambda, ay);
        s * x + (1.0 - s) * nu_unchecked(lambda, x)
    } else {
        x
    }
}

fn gamma_r(lambda: f64, x: f64, y: f64) -> f64 {
    let ax = x.abs();
    if ax <= lambda.powi(-3) {
        nu_inv(lambda, y)
    } else if ax <= 1.0 {
        let s = sigmoid(lambda, ax);
        s * y + (1.0 - s) * nu_inv(lambda, y)
    } else {
        y
    }
}

fn blend_raw(lambda: f64, kind: BlendKind, x: f64, y: f64) -> (f64, f64) {
    match kind {
        BlendKind::A => (gamma_a(lambda, x, y), y),
        BlendKind::R => (x, gamma_r(lambda, x, y)),
        BlendKind::Blend(t) => {
            let ga = gamma_a(lambda, x, y);
            let gr = gamma_r(lambda, x, y);
            ((1.0 - t) * ga + t * x, t * gr + (1.0 - t) * y)
        }
    }
}

/// B_A, B_R or B_t on the disk of radius 2.
pub fn blend_disk(lambda: f64, kind: BlendKind, x: f64, y: f64) -> Result<(f64, f64)> {
    check_disk(x, y)?;
    Ok(blend_raw(lambda, kind, x, y))
}

/// Inverse of [`blend_disk`]. Each of B_A, B_R, B_t maps the disk onto itself.
pub fn blend_disk_inverse(lambda: f64, kind: BlendKind, x: f64, y: f64) -> Result<(f64, f64)> {
    check_disk(x, y)?;
    match kind {
        BlendKind::A => Ok((inv_a(lambda, x, y), y)),
        BlendKind::R => Ok((x, inv_r(lambda, x, y))),
        BlendKind::Blend(t) if t <= 0.0 => Ok((inv_a(lambda, x, y), y)),
        BlendKind::Blend(t) if t >= 1.0 => Ok((x, inv_r(lambda, x, y))),
        BlendKind::Blend(t) => inv_blend(lambda, t, x, y),
    }
}

fn inv_a(lambda: f64, xp: f64, y: f64) -> f64 {
    let ay = y.abs();
    if ay <= lambda.powi(-3) {
        nu_inv(lambda, xp)
    } else if ay <= 1.0 {
        // substitute u = ν(x) so only the explicit ν⁻¹ is evaluated
        let s = sigmoid(lambda, ay);
        let u = bisect(|u| s * nu_inv(lambda, u) + (1.0 - s) * u - xp, -2.0, 2.0, 1e-16).unwrap_or(xp);
        nu_inv(lambda, u)
    } else {
        xp
    }
}

fn inv_r(lambda: f64, x: f64, yp: f64) -> f64 {
    let ax = x.abs();
    if ax <= lambda.powi(-3) {
        nu_unchecked(lambda, yp)
    } else if ax <= 1.0 {
        let s = sigmoid(lambda, ax);
        bisect(|y| s * y + (1.0 - s) * nu_inv(lambda, y) - yp, -2.0, 2.0, 1e-16).unwrap_or(yp)
    } else {
        yp
    }
}

fn inv_blend(lambda: f64, t: f64, xp: f64, yp: f64) -> Result<(f64, f64)> {
    let target = Vector2::new(xp, yp);
    let eval = |p: Vector2<f64>| {
        let (a, b) = blend_raw(lambda, BlendKind::Blend(t), p.x, p.y);
        Vector2::new(a, b)
    };
    // start from the interpolated one-sided inverses
    let mut p = Vector2::new((1.0 - t) * inv_a(lambda, xp, yp) + t * xp, t * inv_r(lambda, xp, yp) + (1.0 - t) * yp);
    let mut res = eval(p) - target;
    let h = 1e-7;
    for _ in 0..100 {
        if res.amax() < 1e-14 {
            return Ok((p.x, p.y));
        }
        let ex = Vector2::new(h, 0.0);
        let ey = Vector2::new(0.0, h);
        let jac = Matrix2::from_columns(&[
            (eval(p + ex) - eval(p - ex)) / (2.0 * h),
            (eval(p + ey) - eval(p - ey)) / (2.0 * h),
        ]);
        let Some(jinv) = jac.try_inverse() else {
            break;
        };
        let step = jinv * res;
        let mut alpha = 1.0;
        loop {
            let cand = p - step * alpha;
            let r = eval(cand) - target;
            if r.norm() < res.norm() || alpha < 1e-6 {
                p = cand;
                res = r;
                break;
            }
            alpha *= 0.5;
        }
    }
    if res.amax() < 1e-11 {
        Ok((p.x, p.y))
    } else {
        Err(Error::NoConvergence("blend_disk_inverse"))
    }
}

/// Affine chart e(x,y) = ρ0·(x·v_s + y·v_u) mod 1 around O.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurgeryChart {
    pub rho0: f64,
    pub origin: TorusPoint,
    basis: Matrix2<f64>,
    basis_inv: Matrix2<f64>,
}

impl SurgeryChart {
    /// Fails unless the disk of radius 2 embeds: every chart point must sit
    /// within ∞-distance 1/2 of O in the lift.
    pub fn new(rho0: f64, anosov: &AnosovData) -> Result<Self> {
        if !(rho0 > 0.0 && rho0.is_finite()) {
            return Err(Error::ChartNotInjective(format!("rho0 = {rho0} must be > 0")));
        }
        let basis = Matrix2::from_columns(&[anosov.v_s, anosov.v_u]);
        let basis_inv = basis.try_inverse().ok_or_else(|| Error::ChartNotInjective("eigenbasis is singular".into()))?;
        let row_norm = basis.row(0).norm().max(basis.row(1).norm());
        let reach = 2.0 * rho0 * row_norm;
        if reach >= 0.5 {
            return Err(Error::ChartNotInjective(format!(
                "disk of radius 2 reaches {reach:.4} >= 1/2 from O in the lift"
            )));
        }
        Ok(Self { rho0, origin: TorusPoint::ORIGIN, basis, basis_inv })
    }

    pub fn to_torus(&self, x: f64, y: f64) -> TorusPoint {
        let d = self.basis * Vector2::new(x, y) * self.rho0;
        TorusPoint::new(self.origin.u + d.x, self.origin.v + d.y)
    }

    /// Chart coordinates of the lift of `p` nearest to O. Radius ≤ 2 means
    /// `p` is in the chart image.
    pub fn to_chart(&self, p: TorusPoint) -> (f64, f64) {
        let d = p.delta(&self.origin);
        let c = self.basis_inv * d / self.rho0;
        (c.x, c.y)
    }

    /// Chart radius of `p`, or +∞ outside the chart image of the disk.
    pub fn radius(&self, p: TorusPoint) -> f64 {
        let (x, y) = self.to_chart(p);
        let r = x.hypot(y);
        if r <= 2.0 {
            r
        } else {
            f64::INFINITY
        }
    }

    /// Linear map from chart to torus-lift displacements.
    pub fn basis(&self) -> Matrix2<f64> {
        self.basis * self.rho0
    }

    pub fn basis_inv(&self) -> Matrix2<f64> {
        self.basis_inv / self.rho0
    }
}

fn surgery(sys: &SurgerySystem, kind: BlendKind, p: TorusPoint) -> TorusPoint {
    let (x, y) = sys.chart.to_chart(p);
    if x * x + y * y > DISK_R2 {
        return p;
    }
    let (a, b) = blend_raw(sys.anosov.lambda, kind, x, y);
    sys.chart.to_torus(a, b)
}

fn surgery_inverse(sys: &SurgerySystem, kind: BlendKind, p: TorusPoint) -> Result<TorusPoint> {
    let (x, y) = sys.chart.to_chart(p);
    if x * x + y * y > DISK_R2 {
        return Ok(p);
    }
    let (a, b) = blend_disk_inverse(sys.anosov.lambda, kind, x, y)?;
    Ok(sys.chart.to_torus(a, b))
}

/// Ψ̂_A, Ψ̂_R or Ψ̂_t: the linear map composed with the chart surgery.
pub fn da_apply(sys: &SurgerySystem, kind: BlendKind, p: TorusPoint) -> TorusPoint {
    match sys.config.composition_order {
        CompositionOrder::SurgeryAfter => surgery(sys, kind, anosov_apply(&sys.matrix, p)),
        CompositionOrder::SurgeryBefore => anosov_apply(&sys.matrix, surgery(sys, kind, p)),
    }
}

pub fn da_inverse(sys: &SurgerySystem, kind: BlendKind, p: TorusPoint) -> Result<TorusPoint> {
    match sys.config.composition_order {
        CompositionOrder::SurgeryAfter => Ok(anosov_inverse(&sys.matrix, surgery_inverse(sys, kind, p)?)),
        CompositionOrder::SurgeryBefore => surgery_inverse(sys, kind, anosov_inverse(&sys.matrix, p)),
    }
}

/// Central-difference Jacobian of a torus map in lift coordinates.
pub fn torus_jacobian<F: Fn(TorusPoint) -> TorusPoint>(f: F, p: TorusPoint, h: f64) -> Matrix2<f64> {
    let base = f(p);
    let col = |du: f64, dv: f64| {
        let plus = f(TorusPoint::new(p.u + du, p.v + dv)).delta(&base);
        let minus = f(TorusPoint::new(p.u - du, p.v - dv)).delta(&base);
        (plus - minus) / (2.0 * h)
    };
    Matrix2::from_columns(&[col(h, 0.0), col(0.0, h)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{SurgerySystem, SystemConfig};
    use proptest::prelude::*;

    const CAT: [[i64; 2]; 2] = [[2, 1], [1, 1]];

    fn golden() -> f64 {
        (3.0 + 5f64.sqrt()) / 2.0
    }

    fn sys() -> SurgerySystem {
        SurgerySystem::new(SystemConfig::default()).unwrap()
    }

    #[test]
    fn eigen_data_cat_map() {
        let d = eigen_data_checked(CAT).unwrap();
        // quadratic formula on x² − 3x + 1
        let disc: f64 = 9.0 - 4.0;
        assert!((d.lambda - (3.0 + disc.sqrt()) / 2.0).abs() < 1e-14);
        let m = HyperbolicMatrix::new(CAT).unwrap().as_f64();
        assert!((m * d.v_u - d.v_u * d.lambda).norm() < 1e-12);
        assert!((m * d.v_s - d.v_s / d.lambda).norm() < 1e-12);
        assert!((d.v_u.norm() - 1.0).abs() < 1e-15 && (d.v_s.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigen_data_other_matrices() {
        for m in [[[3, 1], [2, 1]], [[1, 1], [1, 2]], [[5, 2], [2, 1]], [[1, 3], [1, 4]]] {
            let d = eigen_data_checked(m).unwrap();
            let hm = HyperbolicMatrix::new(m).unwrap().as_f64();
            assert!((hm * d.v_u - d.v_u * d.lambda).norm() < 1e-12, "{m:?}");
            assert!((hm * d.v_s - d.v_s / d.lambda).norm() < 1e-12, "{m:?}");
            assert!(d.v_u.perp(&d.v_s).abs() > 1e-3);
        }
    }

    #[test]
    fn matrix_validation() {
        assert_eq!(HyperbolicMatrix::new([[1, 1], [1, 0]]).unwrap_err(), Error::NotUnimodular { det: -1 });
        assert_eq!(HyperbolicMatrix::new([[1, 0], [0, 1]]).unwrap_err(), Error::NotHyperbolic { trace: 2 });
        assert!(matches!(HyperbolicMatrix::new([[-2, 1], [1, -1]]).unwrap_err(), Error::NegativeTrace { .. }));
    }

    #[test]
    fn anosov_examples() {
        let c = HyperbolicMatrix::new(CAT).unwrap();
        assert_eq!(anosov_apply(&c, TorusPoint::ORIGIN), TorusPoint::ORIGIN);
        let q = anosov_apply(&c, TorusPoint::new(0.5, 0.0));
        assert_eq!(q, TorusPoint::new(0.0, 0.5));
    }

    #[test]
    fn torus_point_half_open() {
        let p = TorusPoint::new(-1e-18, 1.0);
        assert_eq!(p, TorusPoint::ORIGIN);
        let p = TorusPoint::new(-0.25, 2.75);
        assert_eq!((p.u, p.v), (0.75, 0.75));
    }

    #[test]
    fn sigmoid_examples() {
        let l = golden();
        let a = l.powi(-3);
        assert_eq!(sigmoid(l, a), 0.0);
        assert_eq!(sigmoid(l, 1.0), 1.0);
        assert!((sigmoid(l, 0.5 * (a + 1.0)) - 0.5).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 0..=2000 {
            let s = sigmoid(l, -0.5 + 2.0 * i as f64 / 2000.0);
            assert!(s >= prev && (0.0..=1.0).contains(&s));
            prev = s;
        }
    }

    #[test]
    fn nu_examples() {
        let l = golden();
        assert_eq!(nu(l, 0.0).unwrap(), 0.0);
        assert!((nu(l, l.powi(-3)).unwrap() - 1.0 / l).abs() < 1e-15);
        assert_eq!(nu(l, 1.5).unwrap(), 1.5);
        assert!(matches!(nu(l, 2.5), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn nu_strictly_increasing_and_inverts() {
        let l = golden();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=4000 {
            let x = -2.0 + 4.0 * i as f64 / 4000.0;
            let y = nu(l, x).unwrap();
            assert!(y > prev, "at {x}");
            prev = y;
            assert!((nu_inv(l, y) - x).abs() < 1e-13);
        }
    }

    #[test]
    fn nu_c1_at_seams() {
        let l = golden();
        let d = |x: f64| {
            let h = 1e-7;
            (nu(l, x + h).unwrap() - nu(l, x - h).unwrap()) / (2.0 * h)
        };
        for seam in [l.powi(-3), 1.0] {
            let left = d(seam - 1e-5);
            let right = d(seam + 1e-5);
            assert!((left - right).abs() < 1e-4, "seam {seam}: {left} vs {right}");
        }
    }

    #[test]
    fn literal_nu_is_not_monotone() {
        let l = golden();
        let vals: Vec<f64> = (0..=1000).map(|i| nu_literal(l, i as f64 / 1000.0)).collect();
        let max = vals.iter().cloned().fold(0.0, f64::max);
        assert!(max > 2.0, "literal formula leaves [0,2]: max {max}");
        assert!(vals.windows(2).any(|w| w[1] < w[0]));
    }

    #[test]
    fn blend_linear_branches() {
        let l = golden();
        let r = l.powi(-3);
        for k in 0..16 {
            let a = k as f64 * std::f64::consts::TAU / 16.0;
            let (x, y) = (0.9 * r * a.cos(), 0.9 * r * a.sin());
            let (bx, by) = blend_disk(l, BlendKind::A, x, y).unwrap();
            assert!((bx - l * l * x).abs() < 1e-15 && by == y);
            let (bx, by) = blend_disk(l, BlendKind::R, x, y).unwrap();
            assert!(bx == x && (by - y / (l * l)).abs() < 1e-15);
        }
    }

    #[test]
    fn blend_identity_on_boundary_and_endpoints() {
        let l = golden();
        for k in 0..64 {
            let a = k as f64 * std::f64::consts::TAU / 64.0;
            let (x, y) = (2.0 * a.cos(), 2.0 * a.sin());
            for kind in [BlendKind::A, BlendKind::R, BlendKind::Blend(0.4)] {
                let (bx, by) = blend_disk(l, kind, x, y).unwrap();
                assert!((bx - x).abs() < 1e-15 && (by - y).abs() < 1e-15);
            }
            let (x, y) = (0.7 * a.cos(), 0.5 * a.sin());
            assert_eq!(blend_disk(l, BlendKind::Blend(0.0), x, y).unwrap(), blend_disk(l, BlendKind::A, x, y).unwrap());
            assert_eq!(blend_disk(l, BlendKind::Blend(1.0), x, y).unwrap(), blend_disk(l, BlendKind::R, x, y).unwrap());
        }
        assert!(matches!(blend_disk(l, BlendKind::A, 2.0, 0.1), Err(Error::OutOfDisk { .. })));
    }

    #[test]
    fn blend_injective_on_grid() {
        let l = golden();
        for kind in [BlendKind::A, BlendKind::R, BlendKind::Blend(0.5)] {
            let mut pts = Vec::new();
            for i in 0..100 {
                for j in 0..100 {
                    let x = -1.99 + 3.98 * i as f64 / 99.0;
                    let y = -1.99 + 3.98 * j as f64 / 99.0;
                    if x * x + y * y <= 4.0 {
                        pts.push(blend_disk(l, kind, x, y).unwrap());
                    }
                }
            }
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (i, a) in pts.iter().enumerate() {
                for b in &pts[i + 1..] {
                    if b.0 - a.0 > 1e-12 {
                        break;
                    }
                    assert!((a.1 - b.1).abs() > 1e-12, "{kind:?}: collision {a:?}");
                }
            }
        }
    }

    #[test]
    fn chart_conjugates_linear_map() {
        let s = sys();
        let l = s.anosov.lambda;
        let (x, y) = (0.3, -0.2);
        let q = anosov_apply(&s.matrix, s.chart.to_torus(x, y));
        let (cx, cy) = s.chart.to_chart(q);
        assert!((cx - x / l).abs() < 1e-12 && (cy - l * y).abs() < 1e-12);
    }

    #[test]
    fn chart_rejects_large_scale() {
        let d = eigen_data_checked(CAT).unwrap();
        assert!(matches!(SurgeryChart::new(0.3, &d), Err(Error::ChartNotInjective(_))));
        assert!(SurgeryChart::new(0.2, &eigen_data_checked([[3, 1], [2, 1]]).unwrap()).is_ok());
    }

    #[test]
    fn da_examples() {
        let s = sys();
        let l = s.anosov.lambda;
        assert_eq!(da_apply(&s, BlendKind::A, TorusPoint::ORIGIN), TorusPoint::ORIGIN);
        // post-linear chart radius below λ⁻³: x multiplied by λ²
        let p = s.chart.to_torus(0.5 * l.powi(-3) * l, 0.1 * l.powi(-4));
        let lin = s.chart.to_chart(anosov_apply(&s.matrix, p));
        let da = s.chart.to_chart(da_apply(&s, BlendKind::A, p));
        assert!((da.0 - l * l * lin.0).abs() < 1e-12 && (da.1 - lin.1).abs() < 1e-12);
    }

    #[test]
    fn da_source_at_origin() {
        let s = sys();
        let j = torus_jacobian(|p| da_apply(&s, BlendKind::A, p), TorusPoint::ORIGIN, 1e-6);
        for (re, im) in crate::numerics::eigenvalues_2x2([[j[(0, 0)], j[(0, 1)]], [j[(1, 0)], j[(1, 1)]]]) {
            assert!((re.hypot(im) - s.anosov.lambda).abs() < 1e-6);
        }
    }

    #[test]
    fn da_equals_anosov_outside_chart() {
        let s = sys();
        let mut checked = 0;
        for i in 0..50 {
            for j in 0..50 {
                let p = TorusPoint::new(i as f64 / 50.0 + 0.003, j as f64 / 50.0 + 0.007);
                let q = anosov_apply(&s.matrix, p);
                if s.chart.radius(q).is_infinite() {
                    assert_eq!(da_apply(&s, BlendKind::A, p), q);
                    checked += 1;
                }
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn da_unique_fixed_point_near_origin() {
        let s = sys();
        let r = s.anosov.lambda.powi(-3);
        for i in 0..41 {
            for j in 0..41 {
                let x = -r + 2.0 * r * i as f64 / 40.0;
                let y = -r + 2.0 * r * j as f64 / 40.0;
                if (x, y) == (0.0, 0.0) || x * x + y * y > r * r {
                    continue;
                }
                let p = s.chart.to_torus(x, y);
                assert!(da_apply(&s, BlendKind::A, p).dist(&p) > 1e-9);
            }
        }
    }

    #[test]
    fn surgery_before_order_is_selectable() {
        let cfg = SystemConfig { composition_order: CompositionOrder::SurgeryBefore, ..SystemConfig::default() };
        let s = SurgerySystem::new(cfg).unwrap();
        let p = s.chart.to_torus(0.05, 0.3);
        let q = da_apply(&s, BlendKind::R, p);
        assert!(da_inverse(&s, BlendKind::R, q).unwrap().dist(&p) < 1e-12);
    }

    proptest! {
        #[test]
        fn anosov_round_trip(u in 0.0f64..1.0, v in 0.0f64..1.0) {
            let c = HyperbolicMatrix::new(CAT).unwrap();
            let p = TorusPoint::new(u, v);
            prop_assert!(anosov_inverse(&c, anosov_apply(&c, p)).dist(&p) < 1e-9);
        }

        #[test]
        fn blend_inverse_round_trip(r in 0.0f64..1.999, a in 0.0f64..std::f64::consts::TAU, t in 0.0f64..1.0) {
            let l = golden();
            let (x, y) = (r * a.cos(), r * a.sin());
            for kind in [BlendKind::A, BlendKind::R, BlendKind::Blend(t)] {
                let (bx, by) = blend_disk(l, kind, x, y).unwrap();
                let (ix, iy) = blend_disk_inverse(l, kind, bx, by).unwrap();
                prop_assert!((ix - x).abs() < 1e-10 && (iy - y).abs() < 1e-10, "{:?}", kind);
            }
        }

        #[test]
        fn da_round_trip(u in 0.0f64..1.0, v in 0.0f64..1.0, t in 0.0f64..1.0) {
            let s = sys();
            let p = TorusPoint::new(u, v);
            for kind in [BlendKind::A, BlendKind::R, BlendKind::Blend(t)] {
                let q = da_apply(&s, kind, p);
                prop_assert!(da_inverse(&s, kind, q).unwrap().dist(&p) < 1e-9);
            }
        }
    }
}
