//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown keys, duplicates and
//! malformed values are rejected with the offending line and field, and the
//! finished config is validated by building the system it describes.

use std::fmt;
use std::path::{Path, PathBuf};

use hyperdyn_core::{
    CompositionOrder, Error as CoreError, GluingKind, PhiOrientation, Side, SurgerySystem, SystemConfig,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}, field `{}`: {}", self.field, self.message),
            None => write!(f, "config field `{}`: {}", self.field, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: Option<usize>, field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { line, field: field.to_string(), message: message.into() }
}

/// Tangency scan resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl std::str::FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.trim().split(['x', 'X']).collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(format!("expected NxMxK, got `{s}`"));
        };
        let num = |p: &str| -> Result<usize, String> {
            match p.trim().parse::<usize>() {
                Ok(n) if n >= 2 => Ok(n),
                _ => Err(format!("grid sizes must be integers >= 2, got `{p}`")),
            }
        };
        Ok(Grid { nx: num(a)?, ny: num(b)?, nz: num(c)? })
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub grid: Grid,
    pub tangency_tol: f64,
    pub out: PathBuf,
    pub seed: u64,
    /// Orbit length for `iterate`, iterate count for `attractor`.
    pub iters: Option<usize>,
    /// Samples per `check`.
    pub samples: usize,
    /// Wandering samples for `energy verify`.
    pub energy_samples: usize,
    /// Points per level when estimating γ.
    pub gamma_budget: usize,
    /// Attractor reference cloud: grid side and iterate count.
    pub cloud_grid: usize,
    pub cloud_iters: usize,
    /// Grid density for `attractor`.
    pub attractor_density: usize,
    /// Orbit start for `iterate`; random shell point if absent.
    pub start: Option<(Side, [f64; 3])>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            grid: Grid { nx: 64, ny: 64, nz: 16 },
            tangency_tol: hyperdyn_core::foliation::DEFAULT_TANGENCY_TOL,
            out: PathBuf::from("out"),
            seed: 1,
            iters: None,
            samples: 10_000,
            energy_samples: 10_000,
            gamma_budget: 256,
            cloud_grid: 400,
            cloud_iters: 30,
            attractor_density: 40,
            start: None,
        }
    }
}

pub const KEYS: &[&str] = &[
    "matrix",
    "rho0",
    "gluing_kind",
    "n_exponent",
    "composition_order",
    "phi_orientation",
    "eq_tol",
    "fix_tol",
    "quad_tol",
    "fd_step",
    "iteration_cap",
    "grid",
    "tangency_tol",
    "out",
    "seed",
    "iters",
    "samples",
    "energy_samples",
    "gamma_budget",
    "cloud_grid",
    "cloud_iters",
    "attractor_density",
    "start",
    "start_side",
];

fn parse_matrix(v: &str) -> Result<[[i64; 2]; 2], String> {
    let cleaned: String = v.chars().map(|c| if "[](),;".contains(c) { ' ' } else { c }).collect();
    let nums: Vec<i64> = cleaned
        .split_whitespace()
        .map(|t| t.parse::<i64>().map_err(|_| format!("matrix entries must be integers, got `{t}`")))
        .collect::<Result<_, _>>()?;
    match nums.as_slice() {
        [a, b, c, d] => Ok([[*a, *b], [*c, *d]]),
        _ => Err(format!("expected 4 integer entries, got {}", nums.len())),
    }
}

fn parse_float(v: &str) -> Result<f64, String> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| format!("expected a finite decimal number, got `{v}`"))
}

fn parse_count(v: &str) -> Result<usize, String> {
    v.parse::<usize>().map_err(|_| format!("expected a non-negative integer, got `{v}`"))
}

fn parse_choice<T: Copy>(v: &str, options: &[(&str, T)]) -> Result<T, String> {
    options.iter().find(|(name, _)| name.eq_ignore_ascii_case(v)).map(|o| o.1).ok_or_else(|| {
        let names: Vec<&str> = options.iter().map(|o| o.0).collect();
        format!("expected one of {}, got `{v}`", names.join(", "))
    })
}

fn parse_point(v: &str) -> Result<[f64; 3], String> {
    let nums: Vec<f64> = v.split([',', ' ']).filter(|t| !t.is_empty()).map(parse_float).collect::<Result<_, _>>()?;
    nums.try_into().map_err(|n: Vec<f64>| format!("expected u, v, z, got {} numbers", n.len()))
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(None, "config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses and validates. Keys not present keep their defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        let mut start: Option<[f64; 3]> = None;
        let mut start_side = Side::R;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(err(Some(line), content, "expected `key = value`"));
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(&known) = KEYS.iter().find(|k| **k == key) else {
                return Err(err(Some(line), key, "unknown key"));
            };
            if seen.contains(&known) {
                return Err(err(Some(line), key, "duplicate key"));
            }
            seen.push(known);
            let sys = &mut cfg.system;
            let tol = &mut sys.tolerances;
            let res: Result<(), String> = match known {
                "matrix" => parse_matrix(value).map(|m| sys.matrix = m),
                "rho0" => parse_float(value).map(|x| sys.rho0 = x),
                "gluing_kind" => parse_choice(value, &[("plain", GluingKind::Plain), ("generic", GluingKind::Generic)])
                    .map(|k| sys.gluing_kind = k),
                "n_exponent" => value
                    .parse::<u32>()
                    .map_err(|_| format!("expected a positive integer, got `{value}`"))
                    .map(|n| sys.n_exponent = n),
                "composition_order" => parse_choice(
                    value,
                    &[
                        ("surgery_after", CompositionOrder::SurgeryAfter),
                        ("surgery_before", CompositionOrder::SurgeryBefore),
                    ],
                )
                .map(|o| sys.composition_order = o),
                "phi_orientation" => {
                    parse_choice(value, &[("repaired", PhiOrientation::Repaired), ("literal", PhiOrientation::Literal)])
                        .map(|o| sys.phi_orientation = o)
                }
                "eq_tol" => parse_float(value).map(|x| tol.eq_tol = x),
                "fix_tol" => parse_float(value).map(|x| tol.fix_tol = x),
                "quad_tol" => parse_float(value).map(|x| tol.quad_tol = x),
                "fd_step" => parse_float(value).map(|x| tol.fd_step = x),
                "iteration_cap" => parse_count(value).map(|n| sys.iteration_cap = n),
                "grid" => value.parse::<Grid>().map(|g| cfg.grid = g),
                "tangency_tol" => parse_float(value).map(|x| cfg.tangency_tol = x),
                "out" => {
                    cfg.out = PathBuf::from(value);
                    Ok(())
                }
                "seed" => value
                    .parse::<u64>()
                    .map_err(|_| format!("expected an unsigned integer, got `{value}`"))
                    .map(|s| cfg.seed = s),
                "iters" => parse_count(value).map(|n| cfg.iters = Some(n)),
                "samples" => parse_count(value).map(|n| cfg.samples = n),
                "energy_samples" => parse_count(value).map(|n| cfg.energy_samples = n),
                "gamma_budget" => parse_count(value).map(|n| cfg.gamma_budget = n),
                "cloud_grid" => parse_count(value).map(|n| cfg.cloud_grid = n),
                "cloud_iters" => parse_count(value).map(|n| cfg.cloud_iters = n),
                "attractor_density" => parse_count(value).map(|n| cfg.attractor_density = n),
                "start" => parse_point(value).map(|p| start = Some(p)),
                "start_side" => parse_choice(value, &[("A", Side::A), ("R", Side::R)]).map(|s| start_side = s),
                _ => unreachable!("key list and match arms agree"),
            };
            res.map_err(|m| err(Some(line), key, m))?;
        }
        if seen.contains(&"start_side") && start.is_none() {
            return Err(err(None, "start_side", "given without `start`"));
        }
        cfg.start = start.map(|p| (start_side, p));
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the run parameters and that the system can be built.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("samples", self.samples),
            ("energy_samples", self.energy_samples),
            ("gamma_budget", self.gamma_budget),
            ("cloud_grid", self.cloud_grid),
            ("attractor_density", self.attractor_density),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(err(None, name, "must be at least 1"));
            }
        }
        if self.tangency_tol.is_nan() || self.tangency_tol <= 0.0 {
            return Err(err(None, "tangency_tol", "must be > 0"));
        }
        if self.cloud_iters > 100 {
            return Err(err(None, "cloud_iters", "at most 100 iterates"));
        }
        self.build_system().map(|_| ())
    }

    pub fn build_system(&self) -> Result<SurgerySystem, ConfigError> {
        SurgerySystem::new(self.system).map_err(|e| {
            let field = match e {
                CoreError::NotHyperbolic { .. } | CoreError::NotUnimodular { .. } | CoreError::NegativeTrace { .. } => {
                    "matrix"
                }
                CoreError::ChartNotInjective(_) => "rho0",
                _ => "tolerances",
            };
            err(None, field, format!("{} ({e:?})", e))
        })
    }
}
