//! Nearest-neighbour queries against point clouds in T²×ℝ, bucketed on a
//! periodic torus grid.

use crate::error::{Error, Result};
use crate::product::ProductPoint;

#[derive(Debug, Clone)]
pub struct PeriodicCloud {
    points: Vec<ProductPoint>,
    n: usize,
    buckets: Vec<Vec<u32>>,
}

fn cell(x: f64, n: usize) -> usize {
    ((x.rem_euclid(1.0) * n as f64) as usize).min(n - 1)
}

impl PeriodicCloud {
    /// Picks about four points per bucket.
    pub fn new(points: Vec<ProductPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InsufficientSamples("empty cloud".into()));
        }
        let n = ((points.len() as f64 / 4.0).sqrt() as usize).clamp(1, 1024);
        let mut buckets = vec![Vec::new(); n * n];
        for (i, p) in points.iter().enumerate() {
            buckets[cell(p.w.u, n) * n + cell(p.w.v, n)].push(i as u32);
        }
        Ok(Self { points, n, buckets })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[ProductPoint] {
        &self.points
    }

    /// Distance to the nearest cloud point. Rings of buckets are searched
    /// outward until no unsearched bucket can hold a closer point.
    pub fn nearest_dist(&self, q: &ProductPoint) -> f64 {
        let n = self.n as i64;
        let (ci, cj) = (cell(q.w.u, self.n) as i64, cell(q.w.v, self.n) as i64);
        let h = 1.0 / self.n as f64;
        let mut best = f64::INFINITY;
        let max_ring = n / 2 + 1;
        for r in 0..=max_ring {
            for di in -r..=r {
                for dj in -r..=r {
                    if di.abs() != r && dj.abs() != r {
                        continue;
                    }
                    if 2 * r + 1 > n && (di < -(n / 2) || di > (n - 1) / 2 || dj < -(n / 2) || dj > (n - 1) / 2) {
                        continue;
                    }
                    let b = ((ci + di).rem_euclid(n) * n + (cj + dj).rem_euclid(n)) as usize;
                    for &k in &self.buckets[b] {
                        best = best.min(self.points[k as usize].dist(q));
                    }
                }
            }
            // anything outside ring r is at least r bucket widths away
            if best <= r as f64 * h {
                break;
            }
        }
        best
    }
}
