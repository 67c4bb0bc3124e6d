use thiserror::Error;

/// Errors raised by the toolkit. Messages name the offending quantity.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("polytope is not bounded")]
    NotBounded,
    #[error("polytope is not Delzant at vertex {vertex:?}: |det| = {det}")]
    NotDelzant { vertex: Vec<f64>, det: String },
    #[error("polytope has empty interior")]
    EmptyInterior,
    #[error("invalid polytope: {0}")]
    InvalidPolytope(String),
    #[error("point {0:?} is not strictly interior")]
    NotInterior(Vec<f64>),
    #[error("weight is not positive on the closed polytope (min sample {min})")]
    NonpositiveWeight { min: f64 },
    #[error("evaluation at {0:?}, which lies outside the closed polytope")]
    EvaluationOutsideClosure(Vec<f64>),
    #[error("sublevel set touches the boundary of the x-box; enlarge the box")]
    NotCompact,
    #[error("lattice (1/{k})Z^n meets the polytope in too few points")]
    EmptyLattice { k: u64 },
    #[error("lattice hull at k = {k} does not cover the polytope")]
    HullMismatch { k: u64 },
    #[error("input is affine (filtration norm {norm:e})")]
    AffineInput { norm: f64 },
    #[error("moment matrix is singular")]
    DegenerateMomentMatrix,
    #[error("hessian is not positive definite at {at:?}")]
    NotStrictlyConvex { at: Vec<f64>, t: Option<f64> },
    #[error("mesh too coarse: {0}")]
    MeshTooCoarse(String),
    #[error("linear program is unbounded")]
    LpUnbounded,
    #[error("linear program is infeasible")]
    LpInfeasible,
    #[error("no convergence after {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("starting point is infeasible")]
    InfeasibleStart,
    #[error("no destabilizer: optimum {value} is not negative")]
    NoDestabilizer { value: f64 },
    #[error("W_h covers the whole polytope (Case 1)")]
    Case1,
    #[error("t = {0} is outside [0, 1]")]
    TOutOfRange(f64),
    #[error("target is not balanced against affine functions (residual {residual:e})")]
    Unbalanced { residual: f64 },
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("Newton stalled at t = {t} (residual {residual:e})")]
    NewtonStalled { t: f64, residual: f64 },
    #[error("dimension {0} is not supported by this operation")]
    UnsupportedDimension(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}
