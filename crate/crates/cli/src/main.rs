use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use hyperdyn_cli::commands::{self, CheckKind, Command, Console, EnergyStage};
use hyperdyn_cli::config::{Grid, RunConfig};

/// Surgery on Anosov flows: build the glued diffeomorphism, run its checks,
/// scan for tangencies and verify the energy function.
#[derive(Parser, Debug)]
#[command(name = "hyperdyn", version)]
struct Cli {
    /// Flat `key = value` run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory for CSV and PGM artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Tangency scan grid.
    #[arg(long, global = true, value_name = "NxMxK")]
    grid: Option<Grid>,
    /// Orbit length (iterate), iterate count (attractor, check contraction).
    #[arg(long, global = true, value_name = "N")]
    iters: Option<usize>,
    /// Print results only.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Construct the system and print lambda, r_* and t_*.
    Build,
    /// Write one orbit of f as CSV.
    Iterate,
    /// Write an attractor point cloud and its density raster.
    Attractor,
    /// Run a named invariant check.
    Check {
        #[arg(value_enum)]
        which: Which,
    },
    /// Scan the stable/unstable gap on the glued shell.
    Tangency,
    /// Estimate gamma and build g, or additionally verify the energy decrease.
    Energy {
        #[arg(value_enum)]
        stage: Stage,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Which {
    Profile,
    Trapping,
    Commutation,
    Theta,
    Source,
    Contraction,
    All,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Stage {
    Build,
    Verify,
}

fn command(c: &Cmd) -> Command {
    match c {
        Cmd::Build => Command::Build,
        Cmd::Iterate => Command::Iterate,
        Cmd::Attractor => Command::Attractor,
        Cmd::Tangency => Command::Tangency,
        Cmd::Check { which } => Command::Check(match which {
            Which::Profile => CheckKind::Profile,
            Which::Trapping => CheckKind::Trapping,
            Which::Commutation => CheckKind::Commutation,
            Which::Theta => CheckKind::Theta,
            Which::Source => CheckKind::Source,
            Which::Contraction => CheckKind::Contraction,
            Which::All => CheckKind::All,
        }),
        Cmd::Energy { stage } => Command::Energy(match stage {
            Stage::Build => EnergyStage::Build,
            Stage::Verify => EnergyStage::Verify,
        }),
    }
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("HYPERDYN_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().with_context(|| format!("HYPERDYN_THREADS must be an integer, got `{v}`"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(g) = cli.grid {
        cfg.grid = g;
    }
    if cli.iters.is_some() {
        cfg.iters = cli.iters;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = init_threads().and_then(|_| load(&cli)).and_then(|cfg| {
        let con = Console { quiet: cli.quiet };
        match commands::run(command(&cli.command), &cfg, &con)? {
            true => Ok(()),
            false => bail!("one or more checks failed"),
        }
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
