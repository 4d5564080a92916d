//! Subcommand bodies. Each returns whether every check it ran passed.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hyperdyn_core::checks::{self, CheckOutcome};
use hyperdyn_core::dynamics::{attractor_sample, orbit};
use hyperdyn_core::energy::{
    attractor_cloud, build_g, default_levels, estimate_gamma, leaf_coordinate, verify_energy, EnergyReport,
};
use hyperdyn_core::foliation::{tangency_scan, GridSpec};
use hyperdyn_core::product::{in_k, sample_leaf_point};
use hyperdyn_core::{ManifoldPoint, ProductPoint, Side, SurgerySystem, TorusPoint};

use crate::config::RunConfig;
use crate::export;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Profile,
    Trapping,
    Commutation,
    Theta,
    Source,
    Contraction,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyStage {
    Build,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Build,
    Iterate,
    Attractor,
    Check(CheckKind),
    Tangency,
    Energy(EnergyStage),
}

/// Console output: results always print, commentary only without --quiet.
pub struct Console {
    pub quiet: bool,
}

impl Console {
    pub fn result(&self, line: impl AsRef<str>) {
        println!("{}", line.as_ref());
    }

    pub fn info(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }
}

pub fn run(cmd: Command, cfg: &RunConfig, con: &Console) -> Result<bool> {
    let sys = cfg.build_system()?;
    match cmd {
        Command::Build => build(&sys, con),
        Command::Iterate => iterate(&sys, cfg, con),
        Command::Attractor => attractor(&sys, cfg, con),
        Command::Check(kind) => check(&sys, cfg, kind, con),
        Command::Tangency => tangency(&sys, cfg, con),
        Command::Energy(stage) => energy(&sys, cfg, stage, con),
    }
}

fn out_file(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    Ok(cfg.out.join(name))
}

fn wrote(con: &Console, path: &Path) {
    con.info(format!("wrote {}", path.display()));
}

fn build(sys: &SurgerySystem, con: &Console) -> Result<bool> {
    let m = sys.matrix.entries();
    con.result(format!("matrix = [[{}, {}], [{}, {}]]", m[0][0], m[0][1], m[1][0], m[1][1]));
    con.result(format!("trace = {}", sys.matrix.trace()));
    con.result(format!("lambda = {}", sys.lambda()));
    con.result(format!("lambda_inv = {}", 1.0 / sys.lambda()));
    con.result(format!("r_star = {}", sys.profile.r_star));
    con.result(format!("t_star = {}", sys.profile.t_star));
    con.info(format!("gluing = {:?}, n = {}", sys.config.gluing_kind, sys.config.n_exponent));
    Ok(true)
}

fn leaf_t(sys: &SurgerySystem, m: ManifoldPoint) -> Option<f64> {
    leaf_coordinate(sys, m).ok().map(|c| c.t)
}

fn iterate(sys: &SurgerySystem, cfg: &RunConfig, con: &Console) -> Result<bool> {
    let start = match cfg.start {
        Some((side, [u, v, z])) => ManifoldPoint::new(side, ProductPoint::new(TorusPoint::new(u, v), z)),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let t: f64 = rng.gen();
            ManifoldPoint::new(Side::R, sample_leaf_point(sys, t, &mut rng))
        }
    };
    let n = cfg.iters.unwrap_or(20) as i64;
    let pts = orbit(sys, start, n).context("orbit")?;
    let rows: Vec<_> = pts.iter().map(|&m| (m, leaf_t(sys, m))).collect();
    let path = out_file(cfg, "orbit.csv")?;
    export::orbit_csv(&path, &rows)?;
    con.result(format!("orbit: {} points", rows.len()));
    wrote(con, &path);
    Ok(true)
}

fn attractor(sys: &SurgerySystem, cfg: &RunConfig, con: &Console) -> Result<bool> {
    let iters = cfg.iters.unwrap_or(8);
    let pts = attractor_sample(sys, cfg.attractor_density, iters)?;
    let rows: Vec<_> = pts
        .iter()
        .map(|&p| {
            let t = in_k(sys, p).then(|| leaf_t(sys, ManifoldPoint::new(Side::A, p))).flatten();
            (Side::A, p, t)
        })
        .collect();
    let csv = out_file(cfg, "attractor.csv")?;
    export::points_csv(&csv, &rows)?;
    let pgm = out_file(cfg, "attractor.pgm")?;
    export::write_pgm(&pgm, 256, 256, &export::density_raster(&pts, 256))?;
    let ext = pts.iter().map(|p| p.z.abs()).fold(0.0, f64::max);
    con.result(format!("attractor: {} points after {iters} iterates, z-extent {ext}", pts.len()));
    wrote(con, &csv);
    wrote(con, &pgm);
    Ok(true)
}

fn report(con: &Console, c: &CheckOutcome, started: Instant) -> bool {
    let text = c.to_string();
    let mut lines = text.lines();
    if let Some(head) = lines.next() {
        con.result(format!("{head} [{:.2?}]", started.elapsed()));
    }
    for l in lines {
        if c.passed {
            con.info(l);
        } else {
            con.result(l);
        }
    }
    c.passed
}

fn check(sys: &SurgerySystem, cfg: &RunConfig, kind: CheckKind, con: &Console) -> Result<bool> {
    let kinds = match kind {
        CheckKind::All => vec![
            CheckKind::Profile,
            CheckKind::Trapping,
            CheckKind::Commutation,
            CheckKind::Theta,
            CheckKind::Source,
            CheckKind::Contraction,
        ],
        k => vec![k],
    };
    let mut ok = true;
    for k in kinds {
        let t0 = Instant::now();
        let n = cfg.samples;
        let c = match k {
            CheckKind::Profile => checks::profile_check(sys),
            CheckKind::Trapping => checks::trapping_check(sys, n, cfg.seed),
            CheckKind::Commutation => checks::commutation_check(sys, n, cfg.seed),
            CheckKind::Theta => checks::theta_check(sys, n, cfg.seed),
            CheckKind::Source => checks::source_check(sys),
            CheckKind::Contraction => checks::contraction_check(sys, 10, cfg.iters.unwrap_or(12).max(1))?,
            CheckKind::All => unreachable!("expanded above"),
        };
        ok &= report(con, &c, t0);
    }
    Ok(ok)
}

fn tangency(sys: &SurgerySystem, cfg: &RunConfig, con: &Console) -> Result<bool> {
    let g = cfg.grid;
    let t0 = Instant::now();
    let rep = tangency_scan(sys, GridSpec::for_system(sys, g.nx, g.ny, g.nz), cfg.tangency_tol);
    let s = rep.summary;
    con.result(format!(
        "tangency ({:?}, grid {g}): {} loci, {} in band |y| < lambda^-3/2, {} components [{:.2?}]",
        sys.config.gluing_kind,
        s.loci_count,
        s.band_loci,
        s.components,
        t0.elapsed()
    ));
    con.info(format!("valid nodes {}, min gap {}, mean gap {}", s.valid_nodes, s.min_gap, s.mean_gap));
    let csv = out_file(cfg, "tangency.csv")?;
    export::tangency_csv(&csv, &rep)?;
    let pgm = out_file(cfg, "tangency.pgm")?;
    let (w, h, px) = export::tangency_raster(&rep);
    export::write_pgm(&pgm, w, h, &px)?;
    wrote(con, &csv);
    wrote(con, &pgm);
    Ok(true)
}

fn energy(sys: &SurgerySystem, cfg: &RunConfig, stage: EnergyStage, con: &Console) -> Result<bool> {
    let t0 = Instant::now();
    let cloud = attractor_cloud(sys, cfg.cloud_grid, cfg.cloud_iters)?;
    con.info(format!("attractor cloud: {} points", cloud.len()));
    let prof = estimate_gamma(sys, &default_levels(), cfg.gamma_budget, cfg.seed, &cloud)?;
    let g = build_g(&prof, sys.tol().quad_tol)?;
    con.result(format!("gamma on {} levels, eps3 = {} [{:.2?}]", prof.c.len(), g.epsilons[3], t0.elapsed()));
    let p = out_file(cfg, "gamma.csv")?;
    export::gamma_csv(&p, &prof)?;
    wrote(con, &p);
    let p = out_file(cfg, "g.csv")?;
    export::g_csv(&p, &g, &prof)?;
    wrote(con, &p);
    let p = out_file(cfg, "eps.csv")?;
    export::eps_csv(&p, &g)?;
    wrote(con, &p);
    if stage == EnergyStage::Build {
        return Ok(true);
    }
    let rep = verify_energy(sys, &g, &prof, cfg.energy_samples, cfg.seed, &cloud)?;
    let text = energy_report(&rep);
    for l in text.lines() {
        con.result(l);
    }
    let p = out_file(cfg, "margins.csv")?;
    export::margins_csv(&p, &rep)?;
    wrote(con, &p);
    let p = out_file(cfg, "energy_report.txt")?;
    std::fs::write(&p, &text)?;
    wrote(con, &p);
    con.info(format!("total {:.2?}", t0.elapsed()));
    Ok(rep.ok())
}

/// Plain-text verification summary; failures name the property and the
/// worst sample.
pub fn energy_report(rep: &EnergyReport) -> String {
    let mut s = String::new();
    let verdict = |b: bool| if b { "PASS" } else { "FAIL" };
    let decrease = rep.violations == 0 && rep.failures == 0;
    s += &format!(
        "{} decrease: psi(f(m)) < psi(m) on {} samples, {} violations, {} failures, max margin {:e}\n",
        verdict(decrease),
        rep.samples,
        rep.violations,
        rep.failures,
        rep.max_margin
    );
    if !decrease {
        let worst = rep
            .margins
            .iter()
            .enumerate()
            .max_by(|a, b| {
                let key = |x: f64| if x.is_nan() { f64::INFINITY } else { x };
                key(*a.1).total_cmp(&key(*b.1))
            })
            .map(|(i, _)| rep.points[i]);
        if let Some(m) = worst {
            s += &format!("  worst sample: side {:?}, u = {}, v = {}, z = {}\n", m.side, m.p.w.u, m.p.w.v, m.p.z);
        }
    }
    s += &format!("{} gradient decay near the attractor:", verdict(rep.gradients_decreasing));
    for (d, g) in &rep.gradients {
        s += &format!(" |grad psi|({d}) = {g:e};");
    }
    s.pop();
    s += "\n";
    for c in &rep.checks {
        s += &format!("{} {}: worst {:e} at c = {}\n", verdict(c.passed), c.name, c.worst, c.at);
    }
    if let Some(u) = rep.underflow_below {
        s += &format!("note: S underflows to 0 below c = {u}\n");
    }
    s
}
