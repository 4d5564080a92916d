//! The profile γ = α/β: α(c) is the squared distance from the level set
//! {φ = c} to the attractor, β(c) the largest |grad φ| on {c ≤ φ ≤ 1/2}.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cloud::PeriodicCloud;
use crate::error::{Error, Result};
use crate::gluing::glue;
use crate::product::{in_u, phi_apply, phi_iterate, sample_leaf_point, Direction, ProductPoint, Side};
use crate::system::{PhiOrientation, SurgerySystem};
use crate::torus::TorusPoint;

use super::{a_leaf_gradient, dphi_dt, t_of_phi};

#[derive(Debug, Clone, PartialEq)]
pub struct GammaProfile {
    /// Strictly increasing levels in (0, 1].
    pub c: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// α/β before the isotonic step.
    pub raw_gamma: Vec<f64>,
    /// Non-decreasing in c.
    pub gamma: Vec<f64>,
}

/// Pool-adjacent-violators fit of a non-decreasing sequence.
pub fn isotonic_increasing(y: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a <= b {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            blocks.push(((a * na as f64 + b * nb as f64) / (na + nb) as f64, na + nb));
        }
    }
    blocks.into_iter().flat_map(|(v, n)| std::iter::repeat_n(v, n)).collect()
}

impl GammaProfile {
    /// Profile from ready-made γ values (α = γ, β = 1).
    pub fn from_values(c: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        let beta = vec![1.0; c.len()];
        Self::from_parts(c, gamma, beta)
    }

    pub fn from_parts(c: Vec<f64>, alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if c.len() < 2 || alpha.len() != c.len() || beta.len() != c.len() {
            return Err(Error::InsufficientSamples(format!("{} levels", c.len())));
        }
        if c.windows(2).any(|w| w[0] >= w[1]) || c[0] <= 0.0 || c[c.len() - 1] > 1.0 {
            return Err(Error::BadCoords("levels must increase strictly inside (0, 1]".into()));
        }
        let raw: Vec<f64> = alpha.iter().zip(&beta).map(|(a, b)| a / b).collect();
        if raw.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::InsufficientSamples("gamma must be positive and finite on every level".into()));
        }
        let gamma = isotonic_increasing(&raw);
        Ok(Self { c, alpha, beta, raw_gamma: raw, gamma })
    }

    /// γ(c) interpolated linearly in (1/c, ln γ). Below the grid the last
    /// segment's slope is continued (never increasing toward 0); above it γ
    /// is held constant.
    pub fn eval(&self, c: f64) -> f64 {
        let n = self.c.len();
        if c >= self.c[n - 1] {
            return self.gamma[n - 1];
        }
        if c <= 0.0 {
            return 0.0;
        }
        let seg = |i: usize| {
            let (x0, x1) = (1.0 / self.c[i], 1.0 / self.c[i + 1]);
            let (y0, y1) = (self.gamma[i].ln(), self.gamma[i + 1].ln());
            (x0, x1, y0, y1)
        };
        let k = self.c.partition_point(|&x| x <= c);
        if k == 0 {
            let (x0, x1, y0, y1) = seg(0);
            let slope = ((y0 - y1) / (x0 - x1)).min(0.0);
            return (y0 + slope * (1.0 / c - x0)).exp();
        }
        let (x0, x1, y0, y1) = seg(k - 1);
        let w = (1.0 / c - x0) / (x1 - x0);
        (y0 + w * (y1 - y0)).exp()
    }
}

/// Levels matching leaf coordinates 0, 0.5, 1, ... 24 (c = 1/2 down to ≈ 0.013).
pub fn default_levels() -> Vec<f64> {
    let ts = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0, 24.0];
    let mut c: Vec<f64> = ts.iter().map(|&t: &f64| 0.5 - t.atan() / std::f64::consts::PI).collect();
    c.reverse();
    c
}

fn cloud_on(sys: &SurgerySystem, side: Side, n: usize, iters: usize) -> Result<PeriodicCloud> {
    let k = match side {
        Side::A => iters as i64,
        Side::R => -(iters as i64),
    };
    let pts: Vec<_> = (0..n * n)
        .into_par_iter()
        .filter_map(|i| {
            let w = TorusPoint::new((i / n) as f64 / n as f64, (i % n) as f64 / n as f64);
            let p = ProductPoint::new(w, 0.0);
            in_u(sys, p).then(|| phi_iterate(side, sys, p, k))
        })
        .collect();
    PeriodicCloud::new(pts)
}

/// Attractor cloud: an n×n torus grid at z = 0 (minus the hole) pushed
/// `iters` times by Φ_A.
pub fn attractor_cloud(sys: &SurgerySystem, n: usize, iters: usize) -> Result<PeriodicCloud> {
    cloud_on(sys, Side::A, n, iters)
}

/// Repeller cloud in the R chart, pulled back by Φ_R.
pub fn repeller_cloud(sys: &SurgerySystem, n: usize, iters: usize) -> Result<PeriodicCloud> {
    cloud_on(sys, Side::R, n, iters)
}

/// Per-sample distance² to the cloud and |grad φ|, for `budget` points of
/// the level set {φ = c}.
fn level_samples(sys: &SurgerySystem, c: f64, budget: usize, seed: u64, cloud: &PeriodicCloud) -> Vec<(f64, f64)> {
    let t = t_of_phi(PhiOrientation::Repaired, c);
    let n = t.floor();
    let s = t - n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t_r = sys.profile.leaf_map(s);
    let starts: Vec<_> = (0..budget).map(|_| sample_leaf_point(sys, t_r, &mut rng)).collect();
    let dphi = dphi_dt(PhiOrientation::Repaired, t).abs();
    starts
        .into_par_iter()
        .filter_map(|y| {
            let mut x = glue(sys, y).ok()?;
            for _ in 0..n as i64 {
                x = phi_apply(Side::A, sys, x, Direction::Fwd);
            }
            let (_, grad) = a_leaf_gradient(sys, x).ok()?;
            let d = cloud.nearest_dist(&x);
            Some((d * d, dphi * grad.norm()))
        })
        .collect()
}

/// Estimates α, β and γ on the given levels (each in (0, 1/2]).
pub fn estimate_gamma(
    sys: &SurgerySystem,
    levels: &[f64],
    budget: usize,
    seed: u64,
    cloud: &PeriodicCloud,
) -> Result<GammaProfile> {
    if sys.config.phi_orientation != PhiOrientation::Repaired {
        return Err(Error::NotInDomain("gamma estimation needs phi = 0 on the attractor"));
    }
    if budget == 0 || levels.len() < 2 {
        return Err(Error::InsufficientSamples(format!("budget {budget}, {} levels", levels.len())));
    }
    if levels.iter().any(|&c| !(c > 0.0 && c <= 0.5)) {
        return Err(Error::BadCoords("levels must lie in (0, 1/2]".into()));
    }
    let mut alpha = Vec::with_capacity(levels.len());
    let mut grad_max = Vec::with_capacity(levels.len());
    for (i, &c) in levels.iter().enumerate() {
        let smp = level_samples(sys, c, budget, seed.wrapping_add(i as u64 * 0x9E37_79B9), cloud);
        if smp.len() < budget.div_ceil(2) {
            return Err(Error::InsufficientSamples(format!("level {c}: {} of {budget} samples usable", smp.len())));
        }
        alpha.push(smp.iter().map(|s| s.0).fold(f64::INFINITY, f64::min).min(1.0));
        grad_max.push(smp.iter().map(|s| s.1).fold(0.0, f64::max));
    }
    // β(c) looks at every level at or above c
    let mut beta = vec![1.0; levels.len()];
    let mut running: f64 = 1.0;
    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&a, &b| levels[b].total_cmp(&levels[a]));
    for i in order {
        running = running.max(grad_max[i]);
        beta[i] = running;
    }
    let mut idx: Vec<usize> = (0..levels.len()).collect();
    idx.sort_by(|&a, &b| levels[a].total_cmp(&levels[b]));
    GammaProfile::from_parts(
        idx.iter().map(|&i| levels[i]).collect(),
        idx.iter().map(|&i| alpha[i]).collect(),
        idx.iter().map(|&i| beta[i]).collect(),
    )
}
