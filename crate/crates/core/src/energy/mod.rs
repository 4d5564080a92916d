//! Lyapunov function φ on M³, its smoothing ψ = g∘φ, and numerical
//! certification that ψ is an energy function.
//!
//! The wandering set is parametrized by a global leaf coordinate t: a point
//! whose orbit last visits the shared shell after k steps of f⁻¹ (or before
//! j steps of f) gets t = s + k (or s − j), s being its K^A leaf there.
//! Along any orbit t advances by exactly 1 per iterate.

mod gamma;
mod smoothing;

pub use gamma::{attractor_cloud, default_levels, estimate_gamma, isotonic_increasing, repeller_cloud, GammaProfile};
pub use smoothing::{build_g, g_eval, partition_sum, sigma_partition, SmoothingFunction, I_MAX};

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cloud::PeriodicCloud;
use crate::dynamics::{canonicalize, f_apply, locate_a, wandering_samples, ALocation, ManifoldPoint};
use crate::error::{Error, Result};
use crate::gluing::{in_a_shell, theta_extended, theta_inverse};
use crate::product::{
    in_k, leaf_locate_unchecked, leaf_of, phi_apply, product_gradient, product_jacobian, Direction, ProductPoint, Side,
};
use crate::system::{GluingKind, PhiOrientation, SurgerySystem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeafCoordinate {
    /// f⁻ⁿ of the point lies in the shell.
    pub n: i64,
    /// K^A leaf of that shell point.
    pub s: f64,
    pub t: f64,
}

/// Leaf coordinate of a wandering point. Fails with `NonWandering` when the
/// shell is not reached within the iteration cap.
pub fn leaf_coordinate(sys: &SurgerySystem, m: ManifoldPoint) -> Result<LeafCoordinate> {
    let cap = sys.config.iteration_cap;
    let mut x = canonicalize(sys, m).map_err(|_| Error::NonWandering { cap })?;
    let in_shell = |x: &ManifoldPoint| x.side == Side::R && in_k(sys, x.p);
    let mut n: i64 = 0;
    match x.side {
        Side::A => {
            while !in_shell(&x) {
                if n as usize >= cap {
                    return Err(Error::NonWandering { cap });
                }
                x = f_apply(sys, x, Direction::Inv)?;
                n += 1;
            }
        }
        Side::R => {
            while !in_shell(&x) {
                if (-n) as usize >= cap || x.side == Side::A {
                    return Err(Error::NonWandering { cap });
                }
                x = f_apply(sys, x, Direction::Fwd)?;
                n -= 1;
            }
            // last visit along the orbit
            loop {
                let y = f_apply(sys, x, Direction::Fwd)?;
                if !in_shell(&y) || (-n) as usize >= cap {
                    break;
                }
                x = y;
                n -= 1;
            }
        }
    }
    let s = sys.profile.leaf_map(leaf_of(sys, x.p)?);
    Ok(LeafCoordinate { n, s, t: n as f64 + s })
}

pub fn phi_of_t(orientation: PhiOrientation, t: f64) -> f64 {
    match orientation {
        PhiOrientation::Repaired => 0.5 - t.atan() / PI,
        PhiOrientation::Literal => 0.5 + t.atan() / PI,
    }
}

pub fn t_of_phi(orientation: PhiOrientation, c: f64) -> f64 {
    match orientation {
        PhiOrientation::Repaired => (PI * (0.5 - c)).tan(),
        PhiOrientation::Literal => (PI * (c - 0.5)).tan(),
    }
}

pub fn dphi_dt(orientation: PhiOrientation, t: f64) -> f64 {
    let d = 1.0 / (PI * (1.0 + t * t));
    match orientation {
        PhiOrientation::Repaired => -d,
        PhiOrientation::Literal => d,
    }
}

/// Point clouds standing in for A and R, with a detection radius.
#[derive(Debug, Clone)]
pub struct NonWanderingDetector {
    pub attractor: PeriodicCloud,
    pub repeller: PeriodicCloud,
    pub tol: f64,
}

impl NonWanderingDetector {
    /// 0 near A, 1 near R, None otherwise.
    fn classify(&self, sys: &SurgerySystem, m: ManifoldPoint) -> Option<f64> {
        match m.side {
            Side::A if self.attractor.nearest_dist(&m.p) < self.tol => Some(0.0),
            Side::R if self.repeller.nearest_dist(&m.p) < self.tol => Some(1.0),
            Side::R => crate::dynamics::a_representative(sys, m)
                .filter(|q| self.attractor.nearest_dist(q) < self.tol)
                .map(|_| 0.0),
            _ => None,
        }
    }
}

fn phi_fallback(sys: &SurgerySystem, m: ManifoldPoint) -> f64 {
    let side = canonicalize(sys, m).map(|c| c.side).unwrap_or(m.side);
    match side {
        Side::A => 0.0,
        Side::R => 1.0,
    }
}

/// φ = 1/2 − arctan(t)/π (or the literal sign), 0 on A and 1 on R. Points
/// whose leaf coordinate exceeds the iteration cap count as A or R by side.
pub fn lyapunov_phi(sys: &SurgerySystem, m: ManifoldPoint) -> f64 {
    match leaf_coordinate(sys, m) {
        Ok(lc) => phi_of_t(sys.config.phi_orientation, lc.t),
        Err(_) => phi_fallback(sys, m),
    }
}

/// [`lyapunov_phi`] with cloud-based detection of A and R first.
pub fn lyapunov_phi_detect(sys: &SurgerySystem, m: ManifoldPoint, det: &NonWanderingDetector) -> f64 {
    det.classify(sys, m).unwrap_or_else(|| lyapunov_phi(sys, m))
}

/// ψ = g(φ(m)).
pub fn energy_psi(sys: &SurgerySystem, g: &SmoothingFunction, m: ManifoldPoint) -> f64 {
    g_eval(g, lyapunov_phi(sys, m), 0)
}

/// K^A leaf of an A-chart shell point and its gradient in lift coordinates.
fn shell_leaf_gradient(sys: &SurgerySystem, q: ProductPoint) -> Result<(f64, Vector3<f64>)> {
    let h = sys.tol().fd_step;
    let leaf = |p: ProductPoint| leaf_locate_unchecked(sys, p).t;
    match sys.config.gluing_kind {
        GluingKind::Plain => Ok((leaf(q), product_gradient(leaf, q, h))),
        GluingKind::Generic => {
            // s = s_plain∘Θ⁻¹, so ∇s = DΘ^{-T} ∇s_plain
            let p = theta_inverse(sys, q)?;
            let j = product_jacobian(|x| theta_extended(sys, x), p, h)?;
            let inv_t = j.try_inverse().ok_or(Error::NoConvergence("singular reshaping Jacobian"))?.transpose();
            Ok((leaf(p), inv_t * product_gradient(leaf, p, h)))
        }
    }
}

/// Leaf coordinate t and ∇t (lift coordinates) of an A-chart point. The
/// gradient is transported as a covector along the orbit to the shell,
/// one finite-difference Jacobian per step.
pub fn a_leaf_gradient(sys: &SurgerySystem, x: ProductPoint) -> Result<(f64, Vector3<f64>)> {
    let cap = sys.config.iteration_cap;
    let h = sys.tol().fd_step;
    let step = |p: ProductPoint, dir: Direction| phi_apply(Side::A, sys, p, dir);
    // path[0] = x, path.last() = shell point; `fwd` tells which way it runs
    let mut path = vec![x];
    let fwd = match locate_a(sys, x) {
        ALocation::Shell => true,
        ALocation::Core(Some(k)) => {
            for _ in 0..k {
                path.push(step(*path.last().unwrap(), Direction::Inv));
            }
            false
        }
        ALocation::Core(None) => return Err(Error::NonWandering { cap }),
        ALocation::Outside => {
            loop {
                let y = step(*path.last().unwrap(), Direction::Fwd);
                path.push(y);
                if in_a_shell(sys, y) {
                    break;
                }
                if path.len() > cap {
                    return Err(Error::NonWandering { cap });
                }
            }
            true
        }
    };
    if fwd {
        loop {
            let y = step(*path.last().unwrap(), Direction::Fwd);
            if !in_a_shell(sys, y) || path.len() > cap {
                break;
            }
            path.push(y);
        }
    }
    let j = path.len() as i64 - 1;
    let (s, mut v) = shell_leaf_gradient(sys, *path.last().unwrap())?;
    let dir = if fwd { Direction::Fwd } else { Direction::Inv };
    for p in path[..path.len() - 1].iter().rev() {
        let jac = product_jacobian(|y| Ok(step(y, dir)), *p, h)?;
        v = jac.transpose() * v;
    }
    let t = if fwd { s - j as f64 } else { s + j as f64 };
    Ok((t, v))
}

/// |grad ψ| at an A-chart point, by the chain rule S(φ)·|φ'(t)|·|∇t|.
pub fn psi_gradient_a(sys: &SurgerySystem, g: &SmoothingFunction, x: ProductPoint) -> Result<f64> {
    let (t, grad) = a_leaf_gradient(sys, x)?;
    let o = sys.config.phi_orientation;
    Ok(g_eval(g, phi_of_t(o, t), 1) * dphi_dt(o, t).abs() * grad.norm())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Worst value of the checked quantity.
    pub worst: f64,
    /// Where it occurred.
    pub at: f64,
}

#[derive(Debug, Clone)]
pub struct EnergyReport {
    pub samples: usize,
    /// Samples with ψ(f(m)) ≥ ψ(m).
    pub violations: usize,
    /// Samples where f or ψ could not be evaluated.
    pub failures: usize,
    pub max_margin: f64,
    /// ψ(f(m)) − ψ(m) per sample (NaN on failure).
    pub margins: Vec<f64>,
    /// The wandering samples behind `margins`, in the same order.
    pub points: Vec<ManifoldPoint>,
    /// (distance to the attractor cloud, largest |grad ψ| found there).
    pub gradients: Vec<(f64, f64)>,
    pub gradients_decreasing: bool,
    pub checks: Vec<PropertyCheck>,
    /// S vanishes in floating point below this level (εᵢ underflow).
    pub underflow_below: Option<f64>,
}

impl EnergyReport {
    pub fn ok(&self) -> bool {
        self.violations == 0 && self.failures == 0 && self.gradients_decreasing && self.checks.iter().all(|c| c.passed)
    }
}

pub const APPROACH_DISTANCES: [f64; 3] = [0.1, 0.01, 0.001];

fn worst_of(name: &'static str, vals: impl Iterator<Item = (f64, f64)>, ok: impl Fn(f64) -> bool) -> PropertyCheck {
    let mut worst = (f64::NEG_INFINITY, f64::NAN);
    for (at, v) in vals {
        if v > worst.0 || v.is_nan() {
            worst = (v, at);
        }
    }
    PropertyCheck { name, passed: ok(worst.0), worst: worst.0, at: worst.1 }
}

/// Checks a)–d) of g, the partition of unity and S ≥ 0 on samples.
pub fn g_property_checks(g: &SmoothingFunction, gamma: &GammaProfile, seed: u64) -> (Vec<PropertyCheck>, Option<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log_uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64, n: usize| -> Vec<f64> {
        (0..n).map(|_| 2f64.powf(rng.gen_range(lo..hi))).collect()
    };
    let part = log_uniform(&mut rng, -39.0, 0.0, 1000);
    let small = log_uniform(&mut rng, -39.0, -3.0, 1000);
    let all = log_uniform(&mut rng, -41.0, 0.0, 1000);
    let upper: Vec<f64> = (0..=100).map(|k| 0.5 + 0.005 * k as f64).collect();
    // last index whose ε is representable
    let last = (4..=I_MAX as usize).rev().find(|&i| g.epsilons[i] > 0.0);
    let underflow_below = match last {
        Some(i) if i < I_MAX as usize => Some(2f64.powi(-(i as i32))),
        _ => None,
    };
    let floor = underflow_below.unwrap_or(2f64.powi(-(I_MAX as i32)));
    let mut checks = vec![
        worst_of("partition of unity", part.iter().map(|&x| (x, (partition_sum(x) - 1.0).abs())), |w| w < 1e-12),
        worst_of("g(c) = c on [1/2, 1]", upper.iter().map(|&c| (c, (g_eval(g, c, 0) - c).abs())), |w| w < 1e-6),
        worst_of("g <= gamma on (0, 1/8)", small.iter().map(|&c| (c, g_eval(g, c, 0) - gamma.eval(c))), |w| w <= 0.0),
        worst_of("g' <= gamma on (0, 1/8)", small.iter().map(|&c| (c, g_eval(g, c, 1) - gamma.eval(c))), |w| w <= 0.0),
        worst_of("S >= 0", all.iter().map(|&c| (c, -g_eval(g, c, 1))), |w| w <= 0.0),
        worst_of(
            "S > 0 above the underflow level",
            all.iter().filter(|&&c| c > floor && c < 1.0).map(|&c| (c, -g_eval(g, c, 1))),
            |w| w < 0.0,
        ),
    ];
    let mut sorted = all.clone();
    sorted.sort_by(f64::total_cmp);
    checks.push(worst_of(
        "g non-decreasing",
        sorted.windows(2).map(|w| (w[1], g_eval(g, w[0], 0) - g_eval(g, w[1], 0))),
        |w| w <= 0.0,
    ));
    checks.push(PropertyCheck {
        name: "g(0) = 0, g'(0) = 0",
        passed: g_eval(g, 0.0, 0) == 0.0 && g_eval(g, 0.0, 1) == 0.0,
        worst: g_eval(g, 0.0, 0),
        at: 0.0,
    });
    (checks, underflow_below)
}

/// End-to-end certificate: ψ decreases along orbits of wandering samples,
/// |grad ψ| shrinks approaching the attractor, and g has its properties.
pub fn verify_energy(
    sys: &SurgerySystem,
    g: &SmoothingFunction,
    gamma: &GammaProfile,
    budget: usize,
    seed: u64,
    cloud: &PeriodicCloud,
) -> Result<EnergyReport> {
    let pts = wandering_samples(sys, budget, seed, 4)?;
    let margins: Vec<f64> = pts
        .par_iter()
        .map(|&m| match f_apply(sys, m, Direction::Fwd) {
            Ok(fm) => energy_psi(sys, g, fm) - energy_psi(sys, g, m),
            Err(_) => f64::NAN,
        })
        .collect();
    let failures = margins.iter().filter(|v| v.is_nan()).count();
    let violations = margins.iter().filter(|&&v| v >= 0.0).count();
    let max_margin = margins.iter().cloned().filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, f64::max);

    let stride = (cloud.len() / 16).max(1);
    let bases: Vec<ProductPoint> = cloud.points().iter().step_by(stride).take(16).copied().collect();
    let gradients: Vec<(f64, f64)> = APPROACH_DISTANCES
        .iter()
        .map(|&d| {
            let worst = bases
                .par_iter()
                .filter_map(|a| psi_gradient_a(sys, g, ProductPoint::new(a.w, a.z + d)).ok())
                .reduce(|| f64::NAN, f64::max);
            (d, worst)
        })
        .collect();
    let gradients_decreasing = gradients.windows(2).all(|w| w[1].1 < w[0].1);
    let (checks, underflow_below) = g_property_checks(g, gamma, seed);
    Ok(EnergyReport {
        samples: pts.len(),
        violations,
        failures,
        max_margin,
        margins,
        points: pts,
        gradients,
        gradients_decreasing,
        checks,
        underflow_below,
    })
}
