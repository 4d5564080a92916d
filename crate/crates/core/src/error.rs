use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("adaptive quadrature exceeded depth {depth} on [{a}, {b}]")]
    MaxDepth { a: f64, b: f64, depth: usize },
    #[error("invalid tolerances: {0}")]
    InvalidTolerances(String),
    #[error("matrix is not hyperbolic (|trace| = {trace} <= 2)")]
    NotHyperbolic { trace: i64 },
    #[error("matrix is not unimodular (det = {det})")]
    NotUnimodular { det: i64 },
    #[error("matrix has negative trace {trace}; only positive-trace matrices are supported")]
    NegativeTrace { trace: i64 },
    #[error("surgery chart is not injective: {0}")]
    ChartNotInjective(String),
    #[error("argument {value} outside domain [{lo}, {hi}]")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },
    #[error("point ({x}, {y}) outside the surgery disk of radius 2")]
    OutOfDisk { x: f64, y: f64 },
    #[error("point not in {0}")]
    NotInDomain(&'static str),
    #[error("surface coordinates invalid for leaf part: {0}")]
    BadCoords(String),
    #[error("chart transition needed more than {cap} iterates")]
    IterationBound { cap: usize },
    #[error("degenerate tangent frame (gram determinant {gram})")]
    DegenerateFrame { gram: f64 },
    #[error("point did not reach the fundamental domain within {cap} iterates")]
    NonWandering { cap: usize },
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("normalization gives eps3 = {0} <= 0")]
    NegativeEps3(f64),
    #[error("inverse solve did not converge: {0}")]
    NoConvergence(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
