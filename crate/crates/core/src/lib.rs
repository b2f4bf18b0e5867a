//! Warped-product metrics with harmonic curvature over surfaces.
//!
//! The crate builds metrics f^{4/p}(g + η) on M × Π, where (M, g) is a
//! closed surface conformal to a constant-curvature metric and (Π, η) an
//! Einstein fibre, by solving the governing semilinear elliptic problem,
//! tracing bifurcating branches, and checking every solution against
//! independent characterizations of harmonic curvature.

pub mod error;
pub mod geometry;
pub mod legendre;
pub mod cli;
pub mod continuation;
pub mod dichotomy;
pub mod linalg;
pub mod residuals;
pub mod spectra;
pub mod tolerances;
pub mod verify4d;

pub use error::{Error, ErrorClass, Result};
