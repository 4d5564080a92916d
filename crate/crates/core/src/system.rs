//! The immutable parameter bundle every map is evaluated against.

use crate::error::{Error, Result};
use crate::numerics::Tolerances;
use crate::profile::GluingProfile;
use crate::torus::{eigen_data, AnosovData, HyperbolicMatrix, SurgeryChart};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GluingKind {
    /// H alone; tangencies are non-generic.
    Plain,
    /// H̃ = Θ∘H.
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompositionOrder {
    /// Ψ̂ = B̂∘Ĉ (default).
    SurgeryAfter,
    /// Ψ̂ = Ĉ∘B̂.
    SurgeryBefore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiOrientation {
    /// φ = 1/2 − arctan(t)/π: decreases along orbits, 0 on A and 1 on R.
    Repaired,
    /// φ = 1/2 + arctan(t)/π as written; increases along orbits.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    pub matrix: [[i64; 2]; 2],
    pub rho0: f64,
    pub gluing_kind: GluingKind,
    pub n_exponent: u32,
    pub composition_order: CompositionOrder,
    pub phi_orientation: PhiOrientation,
    pub tolerances: Tolerances,
    /// Cap on iterates used for chart transitions and leaf coordinates.
    pub iteration_cap: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            matrix: [[2, 1], [1, 1]],
            rho0: 0.2,
            gluing_kind: GluingKind::Plain,
            n_exponent: 1,
            composition_order: CompositionOrder::SurgeryAfter,
            phi_orientation: PhiOrientation::Repaired,
            tolerances: Tolerances::default(),
            iteration_cap: 64,
        }
    }
}

/// U = {chart radius ≥ hole_radius} × [−z_halfwidth, z_halfwidth].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrappingRegion {
    pub hole_radius: f64,
    pub z_halfwidth: f64,
}

impl TrappingRegion {
    pub fn for_lambda(lambda: f64) -> Self {
        Self { hole_radius: lambda.powi(-4), z_halfwidth: lambda.powi(-3) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurgerySystem {
    pub config: SystemConfig,
    pub matrix: HyperbolicMatrix,
    pub anosov: AnosovData,
    pub chart: SurgeryChart,
    pub trapping: TrappingRegion,
    pub profile: GluingProfile,
}

impl SurgerySystem {
    pub fn new(config: SystemConfig) -> Result<Self> {
        config.tolerances.validate()?;
        if config.n_exponent == 0 {
            return Err(Error::InvalidTolerances("n_exponent must be >= 1".into()));
        }
        if config.iteration_cap == 0 {
            return Err(Error::InvalidTolerances("iteration_cap must be >= 1".into()));
        }
        let matrix = HyperbolicMatrix::new(config.matrix)?;
        let anosov = eigen_data(&matrix);
        let chart = SurgeryChart::new(config.rho0, &anosov)?;
        let trapping = TrappingRegion::for_lambda(anosov.lambda);
        let profile = GluingProfile::new(anosov.lambda)?;
        Ok(Self { config, matrix, anosov, chart, trapping, profile })
    }

    pub fn lambda(&self) -> f64 {
        self.anosov.lambda
    }

    pub fn tol(&self) -> &Tolerances {
        &self.config.tolerances
    }

    pub fn with_gluing(&self, kind: GluingKind) -> Self {
        let mut s = self.clone();
        s.config.gluing_kind = kind;
        s
    }
}
