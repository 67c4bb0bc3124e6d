//! Numerical toolkit for stability questions on Delzant polytopes: stability functionals,
//! uniform margins by linear programming, optimal destabilizers, Legendre-side constructions
//! and Abreu-equation solvers in low dimension.

pub mod cells;
pub mod convexfn;
pub mod abreu;
pub mod destabilizer;
pub mod error;
pub mod expr;
pub mod functionals;
pub mod geometry;
pub mod io;
pub mod lp;
pub mod mesh;
pub mod nnls;
pub mod poly;
pub mod quadrature;
pub mod stability;

pub use error::{Error, Result};
pub use geometry::{build_polytope, DelzantPolytope, Facet};
pub use poly::{Polynomial, ScalarField};
