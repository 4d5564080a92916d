//! CSV and PGM artifact writers. Floats are written with Rust's shortest
//! round-trip formatting, so equal runs produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder};

use hyperdyn_core::energy::{g_eval, EnergyReport, GammaProfile, SmoothingFunction};
use hyperdyn_core::{ManifoldPoint, ProductPoint, Side, TransversalityReport};

/// Gaps at or above this value map to white in the tangency raster.
pub const GAP_CLIP: f64 = 0.5;

fn side_name(s: Side) -> &'static str {
    match s {
        Side::A => "A",
        Side::R => "R",
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Comma-separated, header row, LF endings.
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(BufWriter::new(file));
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Binary 8-bit graymap, rows top to bottom.
pub fn write_pgm(path: &Path, width: u32, height: u32, pixels: &[u8]) -> Result<()> {
    assert_eq!(pixels.len(), (width * height) as usize, "raster size");
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    PnmEncoder::new(&mut out)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(pixels, width, height, ExtendedColorType::L8)
        .with_context(|| format!("encoding {}", path.display()))?;
    out.flush()?;
    Ok(())
}

/// Points with their side and, where defined, leaf coordinate.
pub fn points_csv(path: &Path, pts: &[(Side, ProductPoint, Option<f64>)]) -> Result<()> {
    write_csv(
        path,
        &["side", "u", "v", "z", "leaf_t"],
        pts.iter().map(|(s, p, t)| {
            vec![side_name(*s).into(), p.w.u.to_string(), p.w.v.to_string(), p.z.to_string(), opt(*t)]
        }),
    )
}

/// Orbit rows indexed by step.
pub fn orbit_csv(path: &Path, orbit: &[(ManifoldPoint, Option<f64>)]) -> Result<()> {
    write_csv(
        path,
        &["step", "side", "u", "v", "z", "leaf_t"],
        orbit.iter().enumerate().map(|(k, (m, t))| {
            vec![
                k.to_string(),
                side_name(m.side).into(),
                m.p.w.u.to_string(),
                m.p.w.v.to_string(),
                m.p.z.to_string(),
                opt(*t),
            ]
        }),
    )
}

/// Log-scaled (u, v) histogram, v increasing upward.
pub fn density_raster(pts: &[ProductPoint], size: usize) -> Vec<u8> {
    let mut counts = vec![0u32; size * size];
    for p in pts {
        let i = ((p.w.u.rem_euclid(1.0) * size as f64) as usize).min(size - 1);
        let j = ((p.w.v.rem_euclid(1.0) * size as f64) as usize).min(size - 1);
        counts[(size - 1 - j) * size + i] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0);
    if top == 0 {
        return vec![0; size * size];
    }
    let scale = (1.0 + top as f64).ln();
    counts.iter().map(|&c| (255.0 * (1.0 + c as f64).ln() / scale).round() as u8).collect()
}

/// Every scan node: chart coordinates, gap (blank outside the shell) and
/// whether it was marked as a tangency locus.
pub fn tangency_csv(path: &Path, rep: &TransversalityReport) -> Result<()> {
    let mut is_locus = vec![false; rep.gaps.len()];
    for &i in &rep.loci {
        is_locus[i] = true;
    }
    write_csv(
        path,
        &["x", "y", "z", "gap", "signed", "locus"],
        rep.gaps.iter().enumerate().map(|(i, g)| {
            let (x, y, z) = rep.grid.coords(i);
            vec![
                x.to_string(),
                y.to_string(),
                z.to_string(),
                opt(g.map(|g| g.gap)),
                opt(g.map(|g| g.signed)),
                (is_locus[i] as u8).to_string(),
            ]
        }),
    )
}

/// Smallest gap over each (x, y) column, scaled so 0 is black and gaps of
/// [`GAP_CLIP`] or more (and columns with no valid node) are white.
pub fn tangency_raster(rep: &TransversalityReport) -> (u32, u32, Vec<u8>) {
    let g = rep.grid;
    let mut px = vec![255u8; g.nx * g.ny];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let min = (0..g.nz).filter_map(|k| rep.gaps[g.index(i, j, k)].map(|n| n.gap)).fold(f64::INFINITY, f64::min);
            if min.is_finite() {
                px[(g.ny - 1 - j) * g.nx + i] = (255.0 * min.clamp(0.0, GAP_CLIP) / GAP_CLIP).round() as u8;
            }
        }
    }
    (g.nx as u32, g.ny as u32, px)
}

pub fn gamma_csv(path: &Path, prof: &GammaProfile) -> Result<()> {
    write_csv(
        path,
        &["c", "alpha", "beta", "raw_gamma", "gamma"],
        (0..prof.c.len()).map(|i| {
            vec![
                prof.c[i].to_string(),
                prof.alpha[i].to_string(),
                prof.beta[i].to_string(),
                prof.raw_gamma[i].to_string(),
                prof.gamma[i].to_string(),
            ]
        }),
    )
}

/// Levels for tabulating g: 512 uniform points of (0, 1] and quarter-octave
/// steps down to 2^-40.
pub fn g_levels() -> Vec<f64> {
    let mut c: Vec<f64> = (1..=512).map(|k| k as f64 / 512.0).collect();
    c.extend((4..=160).map(|q| 2f64.powf(-(q as f64) / 4.0)));
    c.sort_by(f64::total_cmp);
    c.dedup();
    c
}

pub fn g_csv(path: &Path, g: &SmoothingFunction, prof: &GammaProfile) -> Result<()> {
    write_csv(
        path,
        &["c", "g", "S", "gamma"],
        g_levels().into_iter().map(|c| {
            vec![c.to_string(), g_eval(g, c, 0).to_string(), g_eval(g, c, 1).to_string(), prof.eval(c).to_string()]
        }),
    )
}

/// ε values in index order (ε₃ is the normalization constant).
pub fn eps_csv(path: &Path, g: &SmoothingFunction) -> Result<()> {
    write_csv(
        path,
        &["i", "eps"],
        g.epsilons.iter().enumerate().skip(1).map(|(i, e)| vec![i.to_string(), e.to_string()]),
    )
}

/// Per-sample ψ(f(m)) − ψ(m); blank margin where evaluation failed.
pub fn margins_csv(path: &Path, rep: &EnergyReport) -> Result<()> {
    write_csv(
        path,
        &["index", "side", "u", "v", "z", "margin"],
        rep.points.iter().zip(&rep.margins).enumerate().map(|(i, (m, d))| {
            vec![
                i.to_string(),
                side_name(m.side).into(),
                m.p.w.u.to_string(),
                m.p.w.v.to_string(),
                m.p.z.to_string(),
                if d.is_nan() { String::new() } else { d.to_string() },
            ]
        }),
    )
}
