//! The gluing maps between the two fundamental domains: H (leaf by leaf),
//! the leaf reshaping Θ and the composite H̃ = Θ∘H.

use crate::error::{Error, Result};
use crate::product::{in_k, leaf_locate, leaf_locate_unchecked, LeafLocation, LeafPart, ProductPoint};
use crate::system::{GluingKind, SurgerySystem};
use crate::torus::{da_apply, da_inverse, BlendKind, TorusPoint};

/// Tolerance for accepting a candidate preimage.
const VERIFY_TOL: f64 = 1e-9;

fn snap01(x: f64) -> f64 {
    if x < 1e-13 {
        0.0
    } else if x > 1.0 - 1e-13 {
        1.0
    } else {
        x
    }
}

fn blend_kind(b: f64) -> BlendKind {
    match snap01(b) {
        0.0 => BlendKind::A,
        1.0 => BlendKind::R,
        b => BlendKind::Blend(b),
    }
}

/// H: sends leaf G_t of K^R to leaf G_s of K^A, s = leaf_map(t).
pub fn h_map(sys: &SurgerySystem, p: ProductPoint) -> Result<ProductPoint> {
    let t = leaf_locate(sys, p)?.t;
    Ok(h_on_leaf(sys, p, t))
}

fn h_on_leaf(sys: &SurgerySystem, p: ProductPoint, t: f64) -> ProductPoint {
    let prof = &sys.profile;
    let w = da_apply(sys, blend_kind(prof.blend_param(t)), p.w);
    ProductPoint::new(w, prof.h_zeta_factor(t) * p.z)
}

pub fn h_inverse(sys: &SurgerySystem, q: ProductPoint) -> Result<ProductPoint> {
    let s = leaf_locate(sys, q).map_err(|_| Error::NotInDomain("fundamental domain K^A"))?.t;
    let prof = &sys.profile;
    let t = prof.leaf_map(s);
    let w = da_inverse(sys, blend_kind(prof.blend_param(t)), q.w)?;
    Ok(ProductPoint::new(w, q.z / prof.h_zeta_factor(t)))
}

/// Cylinder radius of the reshaped leaf at height z.
pub fn r_tilde(sys: &SurgerySystem, t: f64, z: f64) -> f64 {
    let prof = &sys.profile;
    let l = sys.lambda();
    let ln = l.powi(sys.config.n_exponent as i32);
    let affine = |t: f64, z: f64| {
        (ln - 1.0) / (2.0 * ln) * prof.r(t) / prof.r(1.0 - t) * z + (ln + 1.0) / (2.0 * ln) * prof.r(t)
    };
    if t == 0.0 || t == 1.0 {
        return affine(t, z);
    }
    let l4 = l.powi(-4);
    let mid = (affine(1.0, -l4) - affine(0.0, -l4)) * t + affine(0.0, -l4);
    let (rt, h) = (prof.r(t), prof.r(1.0 - t));
    if z >= -l4 {
        (mid - rt) / (-l4 - h) * (z - h) + rt
    } else {
        (mid - rt / ln) / (h - l4) * (z + h) + rt / ln
    }
}

fn psi_a_pow(sys: &SurgerySystem, w: TorusPoint, n: i64) -> Result<TorusPoint> {
    let mut w = w;
    if n >= 0 {
        for _ in 0..n {
            w = da_apply(sys, BlendKind::A, w);
        }
    } else {
        for _ in 0..-n {
            w = da_inverse(sys, BlendKind::A, w)?;
        }
    }
    Ok(w)
}

/// Θ: identity on upper tori, Ψ̂_A^{-n} on lower tori, radial reshaping on
/// cylinders.
pub fn theta_map(sys: &SurgerySystem, p: ProductPoint) -> Result<ProductPoint> {
    let loc = leaf_locate(sys, p)?;
    theta_on_leaf(sys, p, loc)
}

/// Θ with the leaf function extended past the boundary of K^A.
pub fn theta_extended(sys: &SurgerySystem, p: ProductPoint) -> Result<ProductPoint> {
    theta_on_leaf(sys, p, leaf_locate_unchecked(sys, p))
}

fn theta_on_leaf(sys: &SurgerySystem, p: ProductPoint, loc: LeafLocation) -> Result<ProductPoint> {
    let n = sys.config.n_exponent as i64;
    match loc.part {
        LeafPart::Upper => Ok(p),
        LeafPart::Lower => Ok(ProductPoint::new(psi_a_pow(sys, p.w, -n)?, p.z)),
        LeafPart::Cylinder => {
            let (x, y) = sys.chart.to_chart(p.w);
            let s = r_tilde(sys, loc.t, p.z) / x.hypot(y);
            Ok(ProductPoint::new(sys.chart.to_torus(x * s, y * s), p.z))
        }
    }
}

fn accept(sys: &SurgerySystem, p: ProductPoint, q: ProductPoint) -> bool {
    in_k(sys, p) && theta_map(sys, p).is_ok_and(|img| img.dist(&q) < VERIFY_TOL)
}

/// Inverse of Θ on Θ(K^A). Tries each part and keeps a candidate whose
/// forward image reproduces `q`.
pub fn theta_inverse(sys: &SurgerySystem, q: ProductPoint) -> Result<ProductPoint> {
    let l = sys.lambda();
    let tol = sys.tol().eq_tol;
    let z = q.z;
    if z.abs() > l.powi(-3) + tol {
        return Err(Error::NotInDomain("reshaped fundamental domain"));
    }
    let (x, y) = sys.chart.to_chart(q.w);
    let rho = x.hypot(y);
    // cylinders first: the torus candidates need a Ψ̂ evaluation
    if rho <= l.powi(-3) + tol && rho > 0.0 {
        if let Some(p) = cylinder_preimage(sys, q, x, y, rho) {
            return Ok(p);
        }
    }
    if z.abs() >= l.powi(-4) - tol {
        if z > 0.0 && accept(sys, q, q) {
            return Ok(q);
        }
        if z < 0.0 {
            let p = ProductPoint::new(psi_a_pow(sys, q.w, sys.config.n_exponent as i64)?, z);
            if accept(sys, p, q) {
                return Ok(p);
            }
        }
    }
    Err(Error::NotInDomain("reshaped fundamental domain"))
}

fn cylinder_preimage(sys: &SurgerySystem, q: ProductPoint, x: f64, y: f64, rho: f64) -> Option<ProductPoint> {
    let prof = &sys.profile;
    let z = q.z;
    let t_max = (1.0 - prof.mu(z.abs())).min(1.0);
    if t_max < 0.0 {
        return None;
    }
    let f = |t: f64| r_tilde(sys, t, z) - rho;
    let make = |t: f64| {
        let s = prof.r(t) / rho;
        ProductPoint::new(sys.chart.to_torus(x * s, y * s), z)
    };
    const STEPS: usize = 32;
    let mut a = 0.0;
    let mut fa = f(a);
    for i in 1..=STEPS {
        let b = t_max * i as f64 / STEPS as f64;
        let fb = f(b);
        let root = if fa == 0.0 {
            Some(a)
        } else if fa * fb <= 0.0 {
            crate::numerics::bisect(f, a, b, 1e-15).ok()
        } else {
            None
        };
        if let Some(t) = root {
            let p = make(t);
            if accept(sys, p, q) {
                return Some(p);
            }
        }
        a = b;
        fa = fb;
    }
    None
}

/// The configured gluing: H, or H̃ = Θ∘H.
pub fn glue(sys: &SurgerySystem, p: ProductPoint) -> Result<ProductPoint> {
    let q = h_map(sys, p)?;
    match sys.config.gluing_kind {
        GluingKind::Plain => Ok(q),
        GluingKind::Generic => theta_map(sys, q),
    }
}

/// [`glue`] with the leaf function extended past the boundary of K, so
/// finite differences can straddle it.
pub fn glue_extended(sys: &SurgerySystem, p: ProductPoint) -> Result<ProductPoint> {
    let q = h_on_leaf(sys, p, leaf_locate_unchecked(sys, p).t);
    match sys.config.gluing_kind {
        GluingKind::Plain => Ok(q),
        GluingKind::Generic => theta_extended(sys, q),
    }
}

pub fn unglue(sys: &SurgerySystem, q: ProductPoint) -> Result<ProductPoint> {
    match sys.config.gluing_kind {
        GluingKind::Plain => h_inverse(sys, q),
        GluingKind::Generic => h_inverse(sys, theta_inverse(sys, q)?),
    }
}

/// Whether an A-side point lies in the image of the gluing.
pub fn in_a_shell(sys: &SurgerySystem, q: ProductPoint) -> bool {
    match sys.config.gluing_kind {
        GluingKind::Plain => in_k(sys, q),
        GluingKind::Generic => {
            let l = sys.lambda();
            let tol = sys.tol().eq_tol;
            if q.z.abs() > l.powi(-3) + tol {
                return false;
            }
            if q.z.abs() < l.powi(-4) - tol && sys.chart.radius(q.w) > l.powi(-3) + tol {
                return false;
            }
            theta_inverse(sys, q).is_ok()
        }
    }
}
