//! Numerical laboratory for the explosion threshold λ* of
//! −Δφ + A u·∇φ = λ g(φ) with homogeneous Dirichlet data on planar domains.
//!
//! * [`geometry`]: grids, stream functions, flows and nonlinearities.
//! * [`elliptic`]: the linear operator, solves, eigenvalues, exit times and
//!   parabolic evolution.
//! * [`explosion`]: minimal solutions, thresholds and bounds.
//! * [`freidlin`]: the averaged one-dimensional problem on flow cells.

pub mod catalog;
pub mod elliptic;
pub mod error;
pub mod explosion;
pub mod field;
pub mod fit;
pub mod freidlin;
pub mod geometry;
pub mod sparse;

pub use catalog::CatalogEntry;
pub use error::{Error, Result};
pub use field::ScalarField;
