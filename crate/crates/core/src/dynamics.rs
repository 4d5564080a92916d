//! The glued diffeomorphism f on M³ = U_A ∪ U_R, points of M³ and their
//! chart representatives.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gluing::{glue, in_a_shell, unglue};
use crate::product::{in_u, phi_apply, trapping_margin, Direction, ProductPoint, Side};
use crate::system::SurgerySystem;
use crate::torus::TorusPoint;

/// A point of M³: a side and a representative in that side's chart.
/// Canonical form keeps points of the shared shell on the R side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldPoint {
    pub side: Side,
    pub p: ProductPoint,
}

impl ManifoldPoint {
    pub fn new(side: Side, p: ProductPoint) -> Self {
        Self { side, p }
    }
}

/// Where an A-side chart point sits relative to the A domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ALocation {
    /// In the glued shell (k = 0).
    Shell,
    /// In the core; `k` pullbacks reach the shell, `None` when the cap was hit
    /// first (the point is within rounding of the attractor).
    Core(Option<usize>),
    /// Not in the A domain: pullbacks leave the slab |z| ≤ λ⁻³.
    Outside,
}

pub fn locate_a(sys: &SurgerySystem, q: ProductPoint) -> ALocation {
    if in_a_shell(sys, q) {
        return ALocation::Shell;
    }
    let zmax = sys.trapping.z_halfwidth + sys.tol().eq_tol;
    if q.z.abs() > zmax {
        return ALocation::Outside;
    }
    let mut y = q;
    for k in 1..=sys.config.iteration_cap {
        y = phi_apply(Side::A, sys, y, Direction::Inv);
        if in_a_shell(sys, y) {
            return ALocation::Core(Some(k));
        }
        if y.z.abs() > zmax {
            return ALocation::Outside;
        }
    }
    ALocation::Core(None)
}

/// Rewrites any chart point as the canonical representative of the same
/// point of M³, extending the gluing equivariantly off the shell.
pub fn canonicalize(sys: &SurgerySystem, m: ManifoldPoint) -> Result<ManifoldPoint> {
    let cap = sys.config.iteration_cap;
    match m.side {
        Side::R => {
            if in_u(sys, m.p) {
                return Ok(m);
            }
            // pull back into U_R, cross over, push forward on the A side
            let mut y = m.p;
            for k in 1..=cap {
                y = phi_apply(Side::R, sys, y, Direction::Inv);
                if in_u(sys, y) {
                    let mut q = glue(sys, y)?;
                    for _ in 0..k {
                        q = phi_apply(Side::A, sys, q, Direction::Fwd);
                    }
                    return canonicalize_a(sys, q);
                }
            }
            Err(Error::IterationBound { cap })
        }
        Side::A => canonicalize_a(sys, m.p),
    }
}

fn canonicalize_a(sys: &SurgerySystem, q: ProductPoint) -> Result<ManifoldPoint> {
    let cap = sys.config.iteration_cap;
    match locate_a(sys, q) {
        ALocation::Shell => Ok(ManifoldPoint::new(Side::R, unglue(sys, q)?)),
        ALocation::Core(_) => Ok(ManifoldPoint::new(Side::A, q)),
        ALocation::Outside => {
            let mut y = q;
            for k in 1..=cap {
                y = phi_apply(Side::A, sys, y, Direction::Fwd);
                if in_a_shell(sys, y) {
                    let mut p = unglue(sys, y)?;
                    for _ in 0..k {
                        p = phi_apply(Side::R, sys, p, Direction::Inv);
                    }
                    return Ok(ManifoldPoint::new(Side::R, p));
                }
            }
            Err(Error::IterationBound { cap })
        }
    }
}

fn settle_a(sys: &SurgerySystem, q: ProductPoint) -> Result<ManifoldPoint> {
    if in_a_shell(sys, q) {
        Ok(ManifoldPoint::new(Side::R, unglue(sys, q)?))
    } else {
        Ok(ManifoldPoint::new(Side::A, q))
    }
}

/// One step of f or f⁻¹ on a canonical point.
pub fn f_apply(sys: &SurgerySystem, m: ManifoldPoint, dir: Direction) -> Result<ManifoldPoint> {
    let eq_tol = sys.tol().eq_tol;
    match (m.side, dir) {
        (Side::R, Direction::Fwd) => {
            let y = phi_apply(Side::R, sys, m.p, Direction::Fwd);
            if trapping_margin(Side::R, sys, y) >= -eq_tol {
                Ok(ManifoldPoint::new(Side::R, y))
            } else {
                let q = glue(sys, m.p)?;
                settle_a(sys, phi_apply(Side::A, sys, q, Direction::Fwd))
            }
        }
        (Side::R, Direction::Inv) => Ok(ManifoldPoint::new(Side::R, phi_apply(Side::R, sys, m.p, Direction::Inv))),
        (Side::A, Direction::Fwd) => settle_a(sys, phi_apply(Side::A, sys, m.p, Direction::Fwd)),
        (Side::A, Direction::Inv) => settle_a(sys, phi_apply(Side::A, sys, m.p, Direction::Inv)),
    }
}

/// `[m, f(m), ..., fⁿ(m)]`, or inverse iterates for negative `n`.
pub fn orbit(sys: &SurgerySystem, m: ManifoldPoint, n: i64) -> Result<Vec<ManifoldPoint>> {
    if n.unsigned_abs() > 1_000_000 {
        return Err(Error::OutOfDomain { value: n as f64, lo: -1e6, hi: 1e6 });
    }
    let dir = if n >= 0 { Direction::Fwd } else { Direction::Inv };
    let mut out = Vec::with_capacity(n.unsigned_abs() as usize + 1);
    let mut cur = m;
    out.push(cur);
    for _ in 0..n.unsigned_abs() {
        cur = f_apply(sys, cur, dir)?;
        out.push(cur);
    }
    Ok(out)
}

/// A-side representative when one exists: the point itself on the A side,
/// the glued image for R-side points of the shell.
pub fn a_representative(sys: &SurgerySystem, m: ManifoldPoint) -> Option<ProductPoint> {
    match m.side {
        Side::A => Some(m.p),
        Side::R => glue(sys, m.p).ok(),
    }
}

/// Distance between two points of M³, compared in a common chart.
pub fn manifold_dist(sys: &SurgerySystem, a: ManifoldPoint, b: ManifoldPoint) -> f64 {
    if a.side == b.side {
        return a.p.dist(&b.p);
    }
    match (a_representative(sys, a), a_representative(sys, b)) {
        (Some(x), Some(y)) => x.dist(&y),
        _ => f64::INFINITY,
    }
}

/// Uniform grid of U: `density²` torus nodes times `density` heights,
/// minus the hole.
pub fn u_grid(sys: &SurgerySystem, density: usize) -> Vec<ProductPoint> {
    let zh = sys.trapping.z_halfwidth;
    let mut out = Vec::new();
    for i in 0..density {
        for j in 0..density {
            let w = TorusPoint::new((i as f64 + 0.5) / density as f64, (j as f64 + 0.5) / density as f64);
            for k in 0..density {
                let z = if density == 1 { 0.0 } else { -zh + 2.0 * zh * k as f64 / (density - 1) as f64 };
                let p = ProductPoint::new(w, z);
                if in_u(sys, p) {
                    out.push(p);
                }
            }
        }
    }
    out
}

fn sample(sys: &SurgerySystem, density: usize, iters: usize, side: Side, dir: Direction) -> Result<Vec<ProductPoint>> {
    if iters > 100 {
        return Err(Error::OutOfDomain { value: iters as f64, lo: 0.0, hi: 100.0 });
    }
    Ok(u_grid(sys, density)
        .into_par_iter()
        .map(|mut p| {
            for _ in 0..iters {
                p = phi_apply(side, sys, p, dir);
            }
            p
        })
        .collect())
}

/// Images of a uniform grid of U_A under Φ_A^iters.
pub fn attractor_sample(sys: &SurgerySystem, density: usize, iters: usize) -> Result<Vec<ProductPoint>> {
    sample(sys, density, iters, Side::A, Direction::Fwd)
}

/// Images of a uniform grid of U_R under Φ_R^{-iters}.
pub fn repeller_sample(sys: &SurgerySystem, density: usize, iters: usize) -> Result<Vec<ProductPoint>> {
    sample(sys, density, iters, Side::R, Direction::Inv)
}

/// Symmetric Hausdorff distance between two clouds in T²×ℝ (brute force).
pub fn hausdorff(a: &[ProductPoint], b: &[ProductPoint]) -> f64 {
    let one_way = |x: &[ProductPoint], y: &[ProductPoint]| {
        x.par_iter().map(|p| y.iter().map(|q| p.dist(q)).fold(f64::INFINITY, f64::min)).reduce(|| 0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

/// Wandering points of M³: random points of K^R leaves pushed up to
/// `spread` steps either way by f. Deterministic in `seed`.
pub fn wandering_samples(sys: &SurgerySystem, n: usize, seed: u64, spread: i64) -> Result<Vec<ManifoldPoint>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<(ProductPoint, i64)> = (0..n)
        .map(|_| {
            let t: f64 = rng.gen();
            (crate::product::sample_leaf_point(sys, t, &mut rng), rng.gen_range(-spread..=spread))
        })
        .collect();
    starts
        .into_par_iter()
        .map(|(p, k)| {
            let dir = if k >= 0 { Direction::Fwd } else { Direction::Inv };
            let mut m = ManifoldPoint::new(Side::R, p);
            for _ in 0..k.unsigned_abs() {
                m = f_apply(sys, m, dir)?;
            }
            Ok(m)
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::gluing::tests::{sample_on_leaf, sys};
    use crate::product::{in_k, leaf_of};
    use crate::system::GluingKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn wandering_samples(s: &SurgerySystem, n: usize, seed: u64) -> Vec<ManifoldPoint> {
        super::wandering_samples(s, n, seed, 4).unwrap()
    }

    #[test]
    fn a_side_contracts() {
        let s = sys(GluingKind::Plain);
        let m = ManifoldPoint::new(Side::A, ProductPoint::new(TorusPoint::new(0.5, 0.5), 0.001));
        let n = f_apply(&s, m, Direction::Fwd).unwrap();
        assert_eq!(n.side, Side::A);
        assert!((n.p.z - 0.001 / s.lambda()).abs() < 1e-15);
    }

    #[test]
    fn inner_boundary_crossing_agrees_with_commutation() {
        for kind in [GluingKind::Plain, GluingKind::Generic] {
            let s = sys(kind);
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            for _ in 0..300 {
                let p = sample_on_leaf(&s, 1.0, &mut rng);
                let m = ManifoldPoint::new(Side::R, p);
                let fm = f_apply(&s, m, Direction::Fwd).unwrap();
                let a = phi_apply(Side::A, &s, glue(&s, p).unwrap(), Direction::Fwd);
                let b = glue(&s, phi_apply(Side::R, &s, p, Direction::Fwd)).unwrap();
                let got = a_representative(&s, fm).unwrap();
                assert!(got.dist(&a) < 1e-9 && got.dist(&b) < 1e-9, "{kind:?}");
            }
        }
    }

    #[test]
    fn fwd_inv_identity() {
        for kind in [GluingKind::Plain, GluingKind::Generic] {
            let s = sys(kind);
            for m in wandering_samples(&s, 1000, 10) {
                let back = f_apply(&s, f_apply(&s, m, Direction::Fwd).unwrap(), Direction::Inv).unwrap();
                assert!(manifold_dist(&s, back, m) < 1e-7, "{kind:?} {m:?} -> {back:?}");
                let back = f_apply(&s, f_apply(&s, m, Direction::Inv).unwrap(), Direction::Fwd).unwrap();
                assert!(manifold_dist(&s, back, m) < 1e-7);
            }
        }
    }

    #[test]
    fn orbit_group_property() {
        let s = sys(GluingKind::Plain);
        let m = wandering_samples(&s, 1, 12)[0];
        assert_eq!(orbit(&s, m, 0).unwrap(), vec![m]);
        let fwd = orbit(&s, m, 5).unwrap();
        let back = orbit(&s, fwd[5], -5).unwrap();
        for (a, b) in fwd.iter().zip(back.iter().rev()) {
            assert!(manifold_dist(&s, *a, *b) < 1e-9);
        }
    }

    #[test]
    fn canonicalize_is_idempotent_and_moves_shell_to_r() {
        let s = sys(GluingKind::Plain);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let p = sample_on_leaf(&s, rng.gen(), &mut rng);
            let q = glue(&s, p).unwrap();
            let c = canonicalize(&s, ManifoldPoint::new(Side::A, q)).unwrap();
            assert_eq!(c.side, Side::R);
            assert!(c.p.dist(&p) < 1e-9);
            assert_eq!(canonicalize(&s, c).unwrap(), c);
        }
    }

    #[test]
    fn canonicalize_outside_points() {
        let s = sys(GluingKind::Plain);
        // R-side point beyond U_R equals an A-side point of the core
        let p = sample_on_leaf(&s, 0.3, &mut ChaCha8Rng::seed_from_u64(14));
        let out = phi_apply(Side::R, &s, phi_apply(Side::R, &s, p, Direction::Fwd), Direction::Fwd);
        let c = canonicalize(&s, ManifoldPoint::new(Side::R, out)).unwrap();
        let expect =
            f_apply(&s, f_apply(&s, ManifoldPoint::new(Side::R, p), Direction::Fwd).unwrap(), Direction::Fwd).unwrap();
        assert!(manifold_dist(&s, c, expect) < 1e-9);
        // A-side point in the hole near the saddle axis maps back to R
        let q = ProductPoint::new(s.chart.to_torus(1e-4, 2e-4), 0.001);
        let c = canonicalize(&s, ManifoldPoint::new(Side::A, q)).unwrap();
        assert_eq!(c.side, Side::R);
        // the saddle axis itself is not part of the manifold
        let axis = ManifoldPoint::new(Side::R, ProductPoint::new(TorusPoint::ORIGIN, 0.5));
        assert!(matches!(canonicalize(&s, axis), Err(Error::IterationBound { .. })));
    }

    #[test]
    fn f_injective_on_samples() {
        let s = sys(GluingKind::Plain);
        let pts = wandering_samples(&s, 2000, 15);
        let imgs: Vec<ManifoldPoint> = pts.iter().map(|m| f_apply(&s, *m, Direction::Fwd).unwrap()).collect();
        for side in [Side::A, Side::R] {
            let mut v: Vec<ProductPoint> = imgs.iter().filter(|m| m.side == side).map(|m| m.p).collect();
            v.sort_by(|a, b| a.z.total_cmp(&b.z));
            for (i, a) in v.iter().enumerate() {
                for b in &v[i + 1..] {
                    if b.z - a.z > 1e-12 {
                        break;
                    }
                    assert!(a.dist(b) > 1e-12);
                }
            }
        }
    }

    #[test]
    fn leaf_index_monotone_along_orbit() {
        let s = sys(GluingKind::Plain);
        let p = sample_on_leaf(&s, 0.4, &mut ChaCha8Rng::seed_from_u64(16));
        let orb = orbit(&s, ManifoldPoint::new(Side::R, p), 6).unwrap();
        // |z| on the A side strictly decreases once the orbit has crossed
        let zs: Vec<f64> = orb.iter().filter(|m| m.side == Side::A).map(|m| m.p.z.abs()).collect();
        assert!(zs.len() >= 5);
        assert!(zs.windows(2).all(|w| w[1] < w[0]));
        assert!(in_k(&s, orb[0].p));
        assert!((leaf_of(&s, orb[0].p).unwrap() - 0.4).abs() < 1e-9);
    }

    #[test]
    fn attractor_sample_contracts() {
        let s = sys(GluingKind::Plain);
        let g0 = attractor_sample(&s, 6, 0).unwrap();
        assert_eq!(g0, u_grid(&s, 6));
        let l = s.lambda();
        for k in [1, 3, 7] {
            let c = attractor_sample(&s, 6, k).unwrap();
            let ext = c.iter().map(|p| p.z.abs()).fold(0.0, f64::max);
            assert!((ext - l.powi(-3) * l.powi(-(k as i32))).abs() < 1e-9);
            assert!(c.iter().all(|p| trapping_margin(Side::A, &s, *p) >= 0.0));
        }
        assert!(attractor_sample(&s, 2, 101).is_err());
    }
}
