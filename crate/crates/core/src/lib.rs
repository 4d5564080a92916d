//! DA-surgery on Anosov torus maps, the attractor/repeller gluing on T²×ℝ,
//! tangency scans and the smoothed energy function.

pub mod checks;
pub mod cloud;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod foliation;
pub mod gluing;
pub mod numerics;
pub mod product;
pub mod profile;
pub mod system;
pub mod torus;

pub use checks::{CheckOutcome, Metric};
pub use dynamics::{ALocation, ManifoldPoint};
pub use error::{Error, Result};
pub use foliation::{GridSpec, NodeGap, ScanSummary, TangentFrame, TransversalityReport};
pub use numerics::Tolerances;
pub use product::{Direction, LeafLocation, LeafPart, ProductPoint, Side, SurfaceCoords};
pub use profile::GluingProfile;
pub use system::{CompositionOrder, GluingKind, PhiOrientation, SurgerySystem, SystemConfig, TrappingRegion};
pub use torus::{AnosovData, BlendKind, HyperbolicMatrix, SurgeryChart, TorusPoint};
