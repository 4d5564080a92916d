//! The T²×ℝ layer: Φ_A and Φ_R, the trapping region, the fundamental domain
//! and its foliation by genus-2 leaves G_t.

use std::f64::consts::TAU;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::system::SurgerySystem;
use crate::torus::{da_apply, da_inverse, BlendKind, TorusPoint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductPoint {
    pub w: TorusPoint,
    pub z: f64,
}

impl ProductPoint {
    pub fn new(w: TorusPoint, z: f64) -> Self {
        Self { w, z }
    }

    /// Shortest displacement (Δu, Δv, Δz) from `other`.
    pub fn delta(&self, other: &ProductPoint) -> Vector3<f64> {
        let d = self.w.delta(&other.w);
        Vector3::new(d.x, d.y, self.z - other.z)
    }

    pub fn dist(&self, other: &ProductPoint) -> f64 {
        self.delta(other).norm()
    }

    /// Moves by a lift-coordinate displacement.
    pub fn offset(&self, d: Vector3<f64>) -> ProductPoint {
        ProductPoint::new(TorusPoint::new(self.w.u + d.x, self.w.v + d.y), self.z + d.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    A,
    R,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Fwd,
    Inv,
}

/// Φ_A(w,z) = (Ψ̂_A(w), z/λ) and Φ_R(w,z) = (Ψ̂_R(w), λz), or their inverses.
pub fn phi_apply(side: Side, sys: &SurgerySystem, p: ProductPoint, dir: Direction) -> ProductPoint {
    let l = sys.lambda();
    let (kind, zf) = match side {
        Side::A => (BlendKind::A, 1.0 / l),
        Side::R => (BlendKind::R, l),
    };
    match dir {
        Direction::Fwd => ProductPoint::new(da_apply(sys, kind, p.w), p.z * zf),
        // one-sided blend inverses are total on the disk
        Direction::Inv => ProductPoint::new(da_inverse(sys, kind, p.w).expect("one-sided blend inverse"), p.z / zf),
    }
}

/// Iterates Φ on one side `n` times (`n < 0` applies the inverse).
pub fn phi_iterate(side: Side, sys: &SurgerySystem, mut p: ProductPoint, n: i64) -> ProductPoint {
    let dir = if n >= 0 { Direction::Fwd } else { Direction::Inv };
    for _ in 0..n.unsigned_abs() {
        p = phi_apply(side, sys, p, dir);
    }
    p
}

/// Signed distance-like margin to the boundary of U (positive inside).
/// U_A and U_R coincide as sets, so `side` only documents intent.
pub fn trapping_margin(_side: Side, sys: &SurgerySystem, p: ProductPoint) -> f64 {
    let rho = sys.chart.radius(p.w).min(2.0);
    let tr = &sys.trapping;
    (tr.z_halfwidth - p.z.abs()).min(rho - tr.hole_radius)
}

pub fn in_u(sys: &SurgerySystem, p: ProductPoint) -> bool {
    trapping_margin(Side::A, sys, p) >= -sys.tol().eq_tol
}

/// Strictly inside the core Φ_A(U_A) = Φ_R⁻¹(U_R) = {ρ ≥ λ⁻³, |z| ≤ λ⁻⁴}.
pub fn in_core_interior(sys: &SurgerySystem, p: ProductPoint) -> bool {
    let tol = sys.tol().eq_tol;
    let l = sys.lambda();
    sys.chart.radius(p.w) > l.powi(-3) + tol && p.z.abs() < l.powi(-4) - tol
}

/// Closed fundamental domain K = U \ int Φ_A(U), shared by both sides.
pub fn in_k(sys: &SurgerySystem, p: ProductPoint) -> bool {
    in_u(sys, p) && !in_core_interior(sys, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LeafPart {
    Upper,
    Lower,
    Cylinder,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceCoords {
    Torus(TorusPoint),
    /// Angle in the chart plane and height z.
    Cylinder {
        angle: f64,
        height: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeafLocation {
    pub t: f64,
    pub part: LeafPart,
    pub coords: SurfaceCoords,
}

/// Leaf and part of a point of K. Torus parts win on the seam circles.
pub fn leaf_locate(sys: &SurgerySystem, p: ProductPoint) -> Result<LeafLocation> {
    if !in_k(sys, p) {
        return Err(Error::NotInDomain("fundamental domain K"));
    }
    Ok(leaf_locate_unchecked(sys, p))
}

/// [`leaf_locate`] without the membership test; t is clamped to [0,1], which
/// extends the leaf function continuously just past the boundary of K.
pub fn leaf_locate_unchecked(sys: &SurgerySystem, p: ProductPoint) -> LeafLocation {
    let prof = &sys.profile;
    let (x, y) = sys.chart.to_chart(p.w);
    let rho = x.hypot(y);
    let a = if rho <= 2.0 { prof.mu(rho) } else { f64::INFINITY };
    let b = prof.mu(p.z.abs());
    if a + b >= 1.0 {
        let part = if p.z > 0.0 { LeafPart::Upper } else { LeafPart::Lower };
        LeafLocation { t: (1.0 - b).clamp(0.0, 1.0), part, coords: SurfaceCoords::Torus(p.w) }
    } else {
        let angle = y.atan2(x).rem_euclid(TAU);
        LeafLocation {
            t: a.clamp(0.0, 1.0),
            part: LeafPart::Cylinder,
            coords: SurfaceCoords::Cylinder { angle, height: p.z },
        }
    }
}

pub fn leaf_of(sys: &SurgerySystem, p: ProductPoint) -> Result<f64> {
    Ok(leaf_locate(sys, p)?.t)
}

/// The point of G_t with the given part and surface coordinates.
pub fn leaf_point(sys: &SurgerySystem, t: f64, part: LeafPart, coords: SurfaceCoords) -> Result<ProductPoint> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfDomain { value: t, lo: 0.0, hi: 1.0 });
    }
    let tol = sys.tol().eq_tol;
    let prof = &sys.profile;
    let (rt, h) = (prof.r(t), prof.r(1.0 - t));
    match (part, coords) {
        (LeafPart::Upper | LeafPart::Lower, SurfaceCoords::Torus(w)) => {
            if sys.chart.radius(w) < rt - tol {
                return Err(Error::BadCoords(format!("torus point inside hole of radius {rt}")));
            }
            let z = if part == LeafPart::Upper { h } else { -h };
            Ok(ProductPoint::new(w, z))
        }
        (LeafPart::Cylinder, SurfaceCoords::Cylinder { angle, height }) => {
            if height.abs() > h + tol {
                return Err(Error::BadCoords(format!("height {height} beyond {h}")));
            }
            Ok(ProductPoint::new(sys.chart.to_torus(rt * angle.cos(), rt * angle.sin()), height))
        }
        _ => Err(Error::BadCoords("coordinates do not match the part".into())),
    }
}

/// Central-difference Jacobian of a map of T²×ℝ in lift coordinates.
pub fn product_jacobian<F>(map: F, p: ProductPoint, h: f64) -> Result<nalgebra::Matrix3<f64>>
where
    F: Fn(ProductPoint) -> Result<ProductPoint>,
{
    let base = map(p)?;
    let mut j = nalgebra::Matrix3::zeros();
    for c in 0..3 {
        let mut d = Vector3::zeros();
        d[c] = h;
        let col = (map(p.offset(d))?.delta(&base) - map(p.offset(-d))?.delta(&base)) / (2.0 * h);
        j.set_column(c, &col);
    }
    Ok(j)
}

/// Central-difference gradient of a scalar function on T²×ℝ.
pub fn product_gradient<F: Fn(ProductPoint) -> f64>(f: F, p: ProductPoint, h: f64) -> Vector3<f64> {
    let mut g = Vector3::zeros();
    for c in 0..3 {
        let mut d = Vector3::zeros();
        d[c] = h;
        g[c] = (f(p.offset(d)) - f(p.offset(-d))) / (2.0 * h);
    }
    g
}

/// Random point of leaf G_t: a part chosen uniformly, then uniform torus
/// coordinates (rejecting the hole) or uniform angle and height.
pub fn sample_leaf_point<R: rand::Rng + ?Sized>(sys: &SurgerySystem, t: f64, rng: &mut R) -> ProductPoint {
    loop {
        let res = match rng.gen_range(0..3) {
            0 => leaf_point(sys, t, LeafPart::Upper, SurfaceCoords::Torus(TorusPoint::new(rng.gen(), rng.gen()))),
            1 => leaf_point(sys, t, LeafPart::Lower, SurfaceCoords::Torus(TorusPoint::new(rng.gen(), rng.gen()))),
            _ => {
                let h = sys.profile.r(1.0 - t);
                leaf_point(
                    sys,
                    t,
                    LeafPart::Cylinder,
                    SurfaceCoords::Cylinder { angle: rng.gen_range(0.0..TAU), height: rng.gen_range(-h..=h) },
                )
            }
        };
        if let Ok(p) = res {
            return p;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::SystemConfig;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (SurgerySystem, crate::profile::GluingProfile) {
        let s = SurgerySystem::new(SystemConfig::default()).unwrap();
        let p = s.profile;
        (s, p)
    }

    fn far_point() -> TorusPoint {
        TorusPoint::new(0.5, 0.5)
    }

    #[test]
    fn phi_examples() {
        let (s, _) = setup();
        let l = s.lambda();
        let o = ProductPoint::new(TorusPoint::ORIGIN, 1.0);
        let a = phi_apply(Side::A, &s, o, Direction::Fwd);
        assert_eq!(a.w, TorusPoint::ORIGIN);
        assert!((a.z - 1.0 / l).abs() < 1e-15);
        let r = phi_apply(Side::R, &s, o, Direction::Fwd);
        assert!((r.z - l).abs() < 1e-15);
    }

    #[test]
    fn phi_round_trip_random() {
        let (s, _) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let p = ProductPoint::new(TorusPoint::new(rng.gen(), rng.gen()), rng.gen_range(-1.0..1.0));
            for side in [Side::A, Side::R] {
                let q = phi_apply(side, &s, phi_apply(side, &s, p, Direction::Fwd), Direction::Inv);
                assert!(q.dist(&p) < 1e-9);
            }
        }
    }

    #[test]
    fn jacobian_off_disk_is_block_diagonal() {
        let (s, _) = setup();
        let p = ProductPoint::new(TorusPoint::new(0.43, 0.61), 0.01);
        assert!(s.chart.radius(crate::torus::anosov_apply(&s.matrix, p.w)).is_infinite());
        let j = crate::numerics::jacobian_fd(
            |d| phi_apply(Side::A, &s, p.offset(d), Direction::Fwd).delta(&phi_apply(Side::A, &s, p, Direction::Fwd)),
            Vector3::zeros(),
            1e-6,
        );
        let c = s.matrix.as_f64();
        for i in 0..2 {
            for k in 0..2 {
                assert!((j[(i, k)] - c[(i, k)]).abs() < 1e-7);
            }
            assert!(j[(i, 2)].abs() < 1e-9 && j[(2, i)].abs() < 1e-9);
        }
        assert!((j[(2, 2)] - 1.0 / s.lambda()).abs() < 1e-8);
    }

    #[test]
    fn margin_boundaries() {
        let (s, _) = setup();
        let l = s.lambda();
        let top = ProductPoint::new(far_point(), l.powi(-3));
        assert!(trapping_margin(Side::A, &s, top).abs() < 1e-12);
        let hole = ProductPoint::new(s.chart.to_torus(l.powi(-4), 0.0), 0.0);
        assert!(trapping_margin(Side::A, &s, hole).abs() < 1e-12);
        assert!(trapping_margin(Side::A, &s, ProductPoint::new(TorusPoint::ORIGIN, 0.0)) < 0.0);
    }

    /// Uniform samples of ∂U: the two boundary tori and the hole cylinder.
    pub(crate) fn boundary_samples(s: &SurgerySystem, n: usize, seed: u64) -> Vec<ProductPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = s.lambda();
        let (h, zh) = (l.powi(-4), l.powi(-3));
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            match rng.gen_range(0..3) {
                0 | 1 => {
                    let w = TorusPoint::new(rng.gen(), rng.gen());
                    if s.chart.radius(w) >= h {
                        let z = if out.len() % 2 == 0 { zh } else { -zh };
                        out.push(ProductPoint::new(w, z));
                    }
                }
                _ => {
                    let a: f64 = rng.gen_range(0.0..TAU);
                    let z = rng.gen_range(-zh..=zh);
                    out.push(ProductPoint::new(s.chart.to_torus(h * a.cos(), h * a.sin()), z));
                }
            }
        }
        out
    }

    #[test]
    fn boundary_maps_strictly_inside() {
        let (s, _) = setup();
        for p in boundary_samples(&s, 10_000, 3) {
            let q = phi_apply(Side::A, &s, p, Direction::Fwd);
            assert!(trapping_margin(Side::A, &s, q) > 0.0, "{p:?} -> {q:?}");
            let q = phi_apply(Side::R, &s, p, Direction::Inv);
            assert!(trapping_margin(Side::R, &s, q) > 0.0);
        }
    }

    #[test]
    fn leaf_examples() {
        let (s, _) = setup();
        let l = s.lambda();
        let top = ProductPoint::new(far_point(), l.powi(-3));
        assert!(leaf_of(&s, top).unwrap().abs() < 1e-9);
        let inner = ProductPoint::new(far_point(), -l.powi(-4));
        assert!((leaf_of(&s, inner).unwrap() - 1.0).abs() < 1e-9);
        let q = leaf_point(&s, 0.0, LeafPart::Upper, SurfaceCoords::Torus(far_point())).unwrap();
        assert!(q.dist(&top) < 1e-15);
        let c = leaf_point(&s, 1.0, LeafPart::Cylinder, SurfaceCoords::Cylinder { angle: 0.7, height: 0.0 }).unwrap();
        assert!((s.chart.radius(c.w) - l.powi(-4) * l).abs() < 1e-12);
        assert!(matches!(
            leaf_point(&s, 0.5, LeafPart::Upper, SurfaceCoords::Torus(TorusPoint::ORIGIN)),
            Err(Error::BadCoords(_))
        ));
        assert!(matches!(leaf_of(&s, ProductPoint::new(far_point(), 0.0)), Err(Error::NotInDomain(_))));
    }

    #[test]
    fn leaves_fill_unit_interval() {
        let (s, _) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let l = s.lambda();
        let mut ts = Vec::new();
        while ts.len() < 10_000 {
            let p = ProductPoint::new(TorusPoint::new(rng.gen(), rng.gen()), rng.gen_range(-l.powi(-3)..l.powi(-3)));
            if in_k(&s, p) {
                ts.push(leaf_of(&s, p).unwrap());
            }
        }
        ts.sort_by(f64::total_cmp);
        let max_gap = ts.windows(2).map(|w| w[1] - w[0]).fold(ts[0], f64::max).max(1.0 - ts[ts.len() - 1]);
        assert!(max_gap < 0.01, "max gap {max_gap}");
    }

    #[test]
    fn nesting_shrinks() {
        let (s, _) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l = s.lambda();
        let mut cloud: Vec<ProductPoint> = (0..400)
            .map(|_| ProductPoint::new(TorusPoint::new(rng.gen(), rng.gen()), rng.gen_range(-l.powi(-3)..l.powi(-3))))
            .filter(|p| in_u(&s, *p))
            .collect();
        let mut prev_ext = f64::INFINITY;
        for _ in 0..12 {
            let ext = cloud.iter().map(|p| p.z.abs()).fold(0.0, f64::max);
            assert!(ext <= prev_ext);
            prev_ext = ext;
            cloud = cloud.into_iter().map(|p| phi_apply(Side::A, &s, p, Direction::Fwd)).collect();
            assert!(cloud.iter().all(|p| in_u(&s, *p)));
        }
    }

    proptest! {
        #[test]
        fn leaf_round_trip(t in 0.0f64..=1.0, u in 0.0f64..1.0, v in 0.0f64..1.0, a in 0.0f64..TAU, hf in -1.0f64..=1.0, which in 0u8..3) {
            let (s, pr) = setup();
            let (part, coords) = match which {
                0 => (LeafPart::Upper, SurfaceCoords::Torus(TorusPoint::new(u, v))),
                1 => (LeafPart::Lower, SurfaceCoords::Torus(TorusPoint::new(u, v))),
                _ => (LeafPart::Cylinder, SurfaceCoords::Cylinder { angle: a, height: hf * pr.r(1.0 - t) }),
            };
            match leaf_point(&s, t, part, coords) {
                Ok(p) => prop_assert!((leaf_of(&s, p).unwrap() - t).abs() < 1e-9),
                Err(Error::BadCoords(_)) => prop_assert!(which < 2),
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }
}
