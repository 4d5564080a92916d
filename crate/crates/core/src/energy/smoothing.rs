//! Dyadic partition of unity on (0,1] and the reparametrization g built
//! from it: g' = S = Σ εᵢ σᵢ, g = ∫₀ S.

use crate::error::{Error, Result};
use crate::numerics::integrate;

use super::gamma::GammaProfile;

/// Partition functions beyond this index are dropped.
pub const I_MAX: u32 = 40;
/// Uniform sub-cells per dyadic cell of the g table.
const SUBCELLS: usize = 32;

fn pow2(k: i32) -> f64 {
    2f64.powi(k)
}

fn bump(i: u32, x: f64) -> f64 {
    let i = i as i32;
    let (a, c, b) = (pow2(-i), pow2(1 - i), pow2(2 - i));
    if x <= a || x >= b {
        return 0.0;
    }
    ((x - c).powi(4) / ((x - a) * (x - b))).exp()
}

/// σᵢ(x): bumps for even i, complements of the neighbouring bumps for odd i.
pub fn sigma_partition(i: u32, x: f64) -> f64 {
    assert!(i >= 1, "partition index starts at 1");
    if i == 1 {
        return if x > 0.5 && x <= 1.0 { 1.0 - bump(2, x) } else { 0.0 };
    }
    if i.is_multiple_of(2) {
        return bump(i, x);
    }
    let k = i as i32;
    if x >= pow2(1 - k) && x < pow2(2 - k) {
        1.0 - bump(i - 1, x)
    } else if x > pow2(-k) && x < pow2(1 - k) {
        1.0 - bump(i + 1, x)
    } else {
        0.0
    }
}

/// Indices whose support can contain x.
fn active(x: f64) -> impl Iterator<Item = u32> {
    let j = if x > 0.0 { (-x.log2()).floor() as i64 } else { i64::MAX - 4 };
    (j - 1..=j + 2).filter(|&i| i >= 1 && i <= I_MAX as i64).map(|i| i as u32)
}

/// Σᵢ σᵢ(x) over the truncated family.
pub fn partition_sum(x: f64) -> f64 {
    active(x).map(|i| sigma_partition(i, x)).sum()
}

#[derive(Debug, Clone)]
pub struct SmoothingFunction {
    /// ε₁..ε_{I_MAX}; index 0 unused.
    pub epsilons: Vec<f64>,
    /// Table nodes, increasing from 0 to 1.
    pub nodes: Vec<f64>,
    /// g at the nodes.
    pub g_table: Vec<f64>,
    pub quad_tol: f64,
}

impl SmoothingFunction {
    /// S(x) = Σ εᵢ σᵢ(x), extended by 0 at x ≤ 0.
    pub fn derivative(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        active(x).map(|i| self.epsilons[i as usize] * sigma_partition(i, x)).sum()
    }
}

/// Table nodes: every dyadic cell (2^{-k}, 2^{-k+1}] split uniformly.
fn table_nodes() -> Vec<f64> {
    let mut nodes = vec![0.0];
    for k in (1..=I_MAX as i32 + 1).rev() {
        let (lo, hi) = (pow2(-k), pow2(1 - k));
        for s in 0..SUBCELLS {
            nodes.push(lo + (hi - lo) * s as f64 / SUBCELLS as f64);
        }
    }
    nodes.push(1.0);
    nodes
}

/// Quadrature with a tolerance scaled to the integrand, so cells deep in the
/// tail keep relative accuracy.
fn cell_integral<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, quad_tol: f64) -> Result<f64> {
    let scale = f(a).abs().max(f(0.5 * (a + b)).abs()).max(f(b).abs());
    if scale == 0.0 {
        return Ok(0.0);
    }
    match integrate(&f, a, b, quad_tol * scale * (b - a)) {
        // denormal integrands cannot meet a relative tolerance
        Err(Error::MaxDepth { .. }) => Ok(composite_simpson(&f, a, b, 64)),
        r => r,
    }
}

fn composite_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let x = a + h * k as f64;
            h / 6.0 * (f(x) + 4.0 * f(x + 0.5 * h) + f(x + h))
        })
        .sum()
}

/// ε₁ = ε₂ = 1, εᵢ = γ(2^{-i}) for i ≥ 4 and ε₃ chosen so that g(1/2) = 1/2
/// under the same quadrature as the table.
pub fn build_g(profile: &GammaProfile, quad_tol: f64) -> Result<SmoothingFunction> {
    let mut eps = vec![0.0; I_MAX as usize + 1];
    eps[1] = 1.0;
    eps[2] = 1.0;
    for (i, e) in eps.iter_mut().enumerate().skip(4) {
        *e = profile.eval(pow2(-(i as i32)));
    }
    let nodes = table_nodes();
    let tail = |x: f64| -> f64 { active(x).filter(|&i| i >= 4).map(|i| eps[i as usize] * sigma_partition(i, x)).sum() };
    // per-cell integrals of the tail sum, σ₁, σ₂ and σ₃
    let mut cells = Vec::with_capacity(nodes.len() - 1);
    for w in nodes.windows(2) {
        let (a, b) = (w[0], w[1]);
        cells.push([
            cell_integral(tail, a, b, quad_tol)?,
            cell_integral(|x| sigma_partition(1, x), a, b, quad_tol)?,
            cell_integral(|x| sigma_partition(2, x), a, b, quad_tol)?,
            cell_integral(|x| sigma_partition(3, x), a, b, quad_tol)?,
        ]);
    }
    let half = nodes.iter().position(|&x| x == 0.5).expect("1/2 is a table node");
    let sum = |k: usize| cells[..half].iter().map(|c| c[k]).sum::<f64>();
    let eps3 = (0.5 - sum(0) - sum(2)) / sum(3);
    if eps3.is_nan() || eps3 <= 0.0 {
        return Err(Error::NegativeEps3(eps3));
    }
    eps[3] = eps3;
    let mut g_table = Vec::with_capacity(nodes.len());
    let mut acc = 0.0;
    g_table.push(0.0);
    for c in &cells {
        acc += c[0] + eps[1] * c[1] + eps[2] * c[2] + eps3 * c[3];
        g_table.push(acc);
    }
    Ok(SmoothingFunction { epsilons: eps, nodes, g_table, quad_tol })
}

/// Order 0: g(c) from the table plus quadrature over the partial cell.
/// Order 1: S(c). Values outside [0,1] are clamped.
pub fn g_eval(g: &SmoothingFunction, c: f64, order: u8) -> f64 {
    let c = c.clamp(0.0, 1.0);
    if order >= 1 {
        return g.derivative(c);
    }
    let k = g.nodes.partition_point(|&x| x <= c).saturating_sub(1).min(g.nodes.len() - 2);
    let a = g.nodes[k];
    let part = cell_integral(|x| g.derivative(x), a, c, g.quad_tol).unwrap_or(0.0);
    g.g_table[k] + part
}
