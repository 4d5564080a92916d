//! Named invariant checks over random samples. Each returns the worst
//! residual together with the sample that produced it.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{attractor_sample, hausdorff};
use crate::error::Result;
use crate::gluing::{glue, theta_map};
use crate::numerics::eigenvalues_2x2;
use crate::product::{
    leaf_locate, phi_apply, sample_leaf_point, trapping_margin, Direction, LeafPart, ProductPoint, Side,
};
use crate::system::{GluingKind, SurgerySystem};
use crate::torus::{da_apply, torus_jacobian, BlendKind, TorusPoint};

/// Whether the residual is an error to keep small or a margin to keep positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    MaxResidual,
    MinMargin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    /// The identity or inclusion being tested.
    pub invariant: &'static str,
    pub metric: Metric,
    pub residual: f64,
    pub tol: f64,
    pub passed: bool,
    pub samples: usize,
    pub worst: Option<ProductPoint>,
    /// Named sub-results, printed after the headline.
    pub details: Vec<(String, f64)>,
}

impl CheckOutcome {
    fn new(name: &'static str, invariant: &'static str, metric: Metric, tol: f64) -> Self {
        Self {
            name,
            invariant,
            metric,
            residual: 0.0,
            tol,
            passed: false,
            samples: 0,
            worst: None,
            details: Vec::new(),
        }
    }

    fn finish(mut self) -> Self {
        self.passed = match self.metric {
            Metric::MaxResidual => self.residual < self.tol,
            Metric::MinMargin => self.residual > self.tol,
        };
        self
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self.metric {
            Metric::MaxResidual => "max residual",
            Metric::MinMargin => "min margin",
        };
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "{verdict} {}: {label} {:e} (tol {:e}, {} samples)",
            self.name, self.residual, self.tol, self.samples
        )?;
        if !self.passed {
            write!(f, "\n  invariant violated: {}", self.invariant)?;
            if let Some(p) = self.worst {
                write!(f, "\n  worst sample: u = {}, v = {}, z = {}", p.w.u, p.w.v, p.z)?;
            }
        }
        for (k, v) in &self.details {
            write!(f, "\n  {k} = {v:e}")?;
        }
        Ok(())
    }
}

/// Largest value and its index (NaN counts as infinite); ties keep the
/// earliest sample.
fn worst_of(values: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best
}

/// Profile identities: endpoint values of μ and τ, the fixed radius of κ
/// and ζ at the fixed leaf.
pub fn profile_check(sys: &SurgerySystem) -> CheckOutcome {
    let p = &sys.profile;
    let l = sys.lambda();
    let mut out =
        CheckOutcome::new("profile", "mu, tau endpoints; kappa(r*) = r*; zeta(t*, .) = id", Metric::MaxResidual, 1e-12);
    let zh = sys.trapping.z_halfwidth;
    let zeta = (0..100)
        .map(|i| {
            let z = -zh + 2.0 * zh * i as f64 / 99.0;
            (p.zeta(p.t_star, z) - z).abs()
        })
        .fold(0.0, f64::max);
    let (mu4, mu3, tau0, tau1) = (p.mu(l.powi(-4)), p.mu(l.powi(-3)), p.tau(0.0), p.tau(1.0));
    let kappa = (p.kappa(p.r_star) - p.r_star).abs();
    out.residual =
        [mu4.abs(), (mu3 - 1.0).abs(), (tau0 - 1.0).abs(), tau1.abs(), kappa, zeta].into_iter().fold(0.0, f64::max);
    out.samples = 100;
    out.details = vec![
        ("mu(lambda^-4)".into(), mu4),
        ("mu(lambda^-3)".into(), mu3),
        ("tau(0)".into(), tau0),
        ("tau(1)".into(), tau1),
        ("|kappa(r*) - r*|".into(), kappa),
        ("max |zeta(t*, z) - z|".into(), zeta),
        ("r*".into(), p.r_star),
        ("t*".into(), p.t_star),
    ];
    out.finish()
}

/// Random points of ∂U: a third on each of the faces z = ±λ⁻³ and a third
/// on the wall of the hole.
pub fn boundary_samples(sys: &SurgerySystem, n: usize, seed: u64) -> Vec<ProductPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tr = sys.trapping;
    (0..n)
        .map(|i| match i % 3 {
            2 => {
                let a = rng.gen_range(0.0..std::f64::consts::TAU);
                let z = rng.gen_range(-tr.z_halfwidth..=tr.z_halfwidth);
                ProductPoint::new(sys.chart.to_torus(tr.hole_radius * a.cos(), tr.hole_radius * a.sin()), z)
            }
            k => loop {
                let w = TorusPoint::new(rng.gen(), rng.gen());
                if sys.chart.radius(w) >= tr.hole_radius {
                    let z = if k == 0 { tr.z_halfwidth } else { -tr.z_halfwidth };
                    break ProductPoint::new(w, z);
                }
            },
        })
        .collect()
}

/// Φ_A pushes the boundary of U strictly inside U.
pub fn trapping_check(sys: &SurgerySystem, n: usize, seed: u64) -> CheckOutcome {
    let mut out = CheckOutcome::new("trapping", "Phi_A(U_A) inside int U_A", Metric::MinMargin, 0.0);
    let pts = boundary_samples(sys, n, seed);
    let neg: Vec<f64> =
        pts.par_iter().map(|&p| -trapping_margin(Side::A, sys, phi_apply(Side::A, sys, p, Direction::Fwd))).collect();
    out.samples = pts.len();
    if let Some((i, v)) = worst_of(&neg) {
        out.residual = -v;
        out.worst = Some(pts[i]);
    }
    out.finish()
}

/// Distances d(a(p), b(p)) over the samples; errors count as infinite.
fn residuals<A, B>(pts: &[ProductPoint], a: A, b: B) -> Vec<f64>
where
    A: Fn(ProductPoint) -> Result<ProductPoint> + Sync,
    B: Fn(ProductPoint) -> Result<ProductPoint> + Sync,
{
    pts.par_iter()
        .map(|&p| match (a(p), b(p)) {
            (Ok(x), Ok(y)) => x.dist(&y),
            _ => f64::INFINITY,
        })
        .collect()
}

fn leaf_samples(sys: &SurgerySystem, t: f64, n: usize, seed: u64) -> Vec<ProductPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sample_leaf_point(sys, t, &mut rng)).collect()
}

/// Φ_A∘G = G∘Φ_R on the inner boundary leaf of K^R, G the configured gluing.
pub fn commutation_check(sys: &SurgerySystem, n: usize, seed: u64) -> CheckOutcome {
    let inv = match sys.config.gluing_kind {
        GluingKind::Plain => "Phi_A o H = H o Phi_R on K^R_2",
        GluingKind::Generic => "Phi_A o H~ = H~ o Phi_R on K^R_2",
    };
    let mut out = CheckOutcome::new("commutation", inv, Metric::MaxResidual, sys.tol().eq_tol);
    let pts = leaf_samples(sys, 1.0, n, seed);
    let res = residuals(
        &pts,
        |p| Ok(phi_apply(Side::A, sys, glue(sys, p)?, Direction::Fwd)),
        |p| glue(sys, phi_apply(Side::R, sys, p, Direction::Fwd)),
    );
    out.samples = pts.len();
    if let Some((i, v)) = worst_of(&res) {
        out.residual = v;
        out.worst = Some(pts[i]);
    }
    out.finish()
}

/// Θ∘Φ_A = Φ_A∘Θ on the outer boundary leaf of K^A, reported per part.
/// Fails if any part went unsampled.
pub fn theta_check(sys: &SurgerySystem, n: usize, seed: u64) -> CheckOutcome {
    let sys = &sys.with_gluing(GluingKind::Generic);
    let mut out =
        CheckOutcome::new("theta", "Theta o Phi_A = Phi_A o Theta on K^A_1", Metric::MaxResidual, sys.tol().eq_tol);
    let pts = leaf_samples(sys, 0.0, n, seed);
    let res = residuals(
        &pts,
        |p| theta_map(sys, phi_apply(Side::A, sys, p, Direction::Fwd)),
        |p| Ok(phi_apply(Side::A, sys, theta_map(sys, p)?, Direction::Fwd)),
    );
    let mut per_part = [(0usize, 0.0f64); 3];
    for (p, r) in pts.iter().zip(&res) {
        let k = match leaf_locate(sys, *p).map(|l| l.part) {
            Ok(LeafPart::Upper) => 0,
            Ok(LeafPart::Cylinder) => 1,
            _ => 2,
        };
        per_part[k].0 += 1;
        per_part[k].1 = per_part[k].1.max(*r);
    }
    out.samples = pts.len();
    if let Some((i, v)) = worst_of(&res) {
        out.residual = v;
        out.worst = Some(pts[i]);
    }
    for (name, (count, worst)) in ["upper torus", "cylinder", "lower torus"].iter().zip(per_part) {
        out.details.push((format!("{name} ({count} samples)"), worst));
        if count == 0 {
            out.residual = f64::INFINITY;
        }
    }
    out.finish()
}

/// Ψ̂_A has a source at O: both eigenvalue moduli of its Jacobian equal λ.
pub fn source_check(sys: &SurgerySystem) -> CheckOutcome {
    let mut out = CheckOutcome::new("source", "eigenvalue moduli of DPsi_A(O) equal lambda", Metric::MaxResidual, 1e-6);
    let j = torus_jacobian(|p| da_apply(sys, BlendKind::A, p), TorusPoint::ORIGIN, sys.tol().fd_step);
    let ev = eigenvalues_2x2([[j[(0, 0)], j[(0, 1)]], [j[(1, 0)], j[(1, 1)]]]);
    for (k, (re, im)) in ev.iter().enumerate() {
        let m = re.hypot(*im);
        out.details.push((format!("|ev{}|", k + 1), m));
        out.residual = out.residual.max((m - sys.lambda()).abs());
    }
    out.samples = 1;
    out.worst = Some(ProductPoint::new(TorusPoint::ORIGIN, 0.0));
    out.finish()
}

/// z-extent of the attractor cloud after k = 1..=kmax iterates against
/// λ⁻³⁻ᵏ, and monotone Hausdorff distances between successive clouds.
pub fn contraction_check(sys: &SurgerySystem, density: usize, kmax: usize) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new(
        "contraction",
        "z-extent of Phi_A^k(U) = lambda^(-3-k); successive Hausdorff distances non-increasing",
        Metric::MaxResidual,
        1e-9,
    );
    let l = sys.lambda();
    let clouds: Vec<Vec<ProductPoint>> =
        (0..=kmax).map(|k| attractor_sample(sys, density, k)).collect::<Result<_>>()?;
    let mut extent_err: f64 = 0.0;
    let mut increases = 0usize;
    let mut prev_h = f64::INFINITY;
    for k in 1..=kmax {
        let c = &clouds[k];
        let ext = c.iter().map(|p| p.z.abs()).fold(0.0, f64::max);
        extent_err = extent_err.max((ext - l.powi(-3 - k as i32)).abs());
        let h = hausdorff(&clouds[k - 1], c);
        out.details.push((format!("hausdorff({}, {k})", k - 1), h));
        if h > prev_h {
            increases += 1;
        }
        prev_h = h;
    }
    out.details.insert(0, ("z-extent residual".into(), extent_err));
    out.details.insert(1, ("hausdorff increases".into(), increases as f64));
    out.residual = if increases > 0 { f64::INFINITY } else { extent_err };
    out.samples = clouds[0].len();
    Ok(out.finish())
}

/// The z-extent half of [`contraction_check`] alone.
pub fn extent_residual(outcome: &CheckOutcome) -> Option<f64> {
    outcome.details.iter().find(|d| d.0 == "z-extent residual").map(|d| d.1)
}
