//! Scalar gluing profile: r, μ, η, κ, τ, ζ, their fixed points, and the
//! leaf transfer used by the gluing map.

use crate::error::Result;
use crate::numerics::bisect;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GluingProfile {
    pub lambda: f64,
    pub r_star: f64,
    pub t_star: f64,
}

impl GluingProfile {
    pub fn new(lambda: f64) -> Result<Self> {
        let mut p = Self { lambda, r_star: f64::NAN, t_star: f64::NAN };
        let (lo, hi) = (p.r(0.0), p.r(1.0));
        p.r_star = bisect(|r| p.kappa(r) - r, lo, hi, 1e-17)?;
        p.t_star = bisect(|t| p.tau(t) - t, 0.0, 1.0, 1e-17)?;
        Ok(p)
    }

    /// Leaf radius, linear from λ⁻⁴ at t = 0 to λ⁻³ at t = 1.
    pub fn r(&self, t: f64) -> f64 {
        let l4 = self.lambda.powi(-4);
        (self.lambda.powi(-3) - l4) * t + l4
    }

    /// Inverse of [`Self::r`].
    pub fn mu(&self, r: f64) -> f64 {
        (self.lambda.powi(4) * r - 1.0) / (self.lambda - 1.0)
    }

    pub fn eta(&self, t: f64) -> f64 {
        t / self.lambda + (1.0 - t) * self.lambda
    }

    pub fn eta_inv(&self, e: f64) -> f64 {
        (self.lambda - e) / (self.lambda - 1.0 / self.lambda)
    }

    pub fn kappa(&self, r: f64) -> f64 {
        self.eta(self.mu(r)) * r
    }

    /// μ∘κ∘r. Equals 1 at 0 and 0 at 1 but exceeds 1 on an initial
    /// interval, so the gluing uses [`Self::leaf_map`] instead.
    pub fn tau(&self, t: f64) -> f64 {
        self.mu(self.kappa(self.r(t)))
    }

    pub fn zeta_factor(&self, t: f64) -> f64 {
        self.r(1.0 - self.tau(t)) / self.r(1.0 - t)
    }

    pub fn zeta(&self, t: f64, z: f64) -> f64 {
        self.zeta_factor(t) * z
    }

    /// Leaf G_t of K^R goes to leaf G_s of K^A with η(s) = 1/η(t): a
    /// decreasing involution of [0,1] fixing t_star.
    pub fn leaf_map(&self, t: f64) -> f64 {
        self.eta_inv(1.0 / self.eta(t)).clamp(0.0, 1.0)
    }

    /// Homotopy parameter whose linear-region homothety η carries the
    /// cylinder of radius r(t) onto radius r(leaf_map(t)).
    pub fn blend_param(&self, t: f64) -> f64 {
        self.eta_inv(self.r(self.leaf_map(t)) / self.r(t)).clamp(0.0, 1.0)
    }

    /// Height scale carrying the tori of G_t to those of G_{leaf_map(t)}.
    pub fn h_zeta_factor(&self, t: f64) -> f64 {
        self.r(1.0 - self.leaf_map(t)) / self.r(1.0 - t)
    }
}
