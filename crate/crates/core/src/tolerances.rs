//! Numerical tolerances used across the crate.
//!
//! Exact-algebra checks use machine-scale bounds; anything involving a
//! discretized derivative is scaled with the grid.

/// Algebraic identities evaluated on constants.
pub const ALGEBRAIC: f64 = 1e-10;

/// Default relative tolerance on eigenpair residuals.
pub const EIGEN_RESIDUAL: f64 = 1e-8;

/// Relative gap below which two eigenvalues are treated as one cluster.
pub const CLUSTER_GAP: f64 = 1e-6;

/// A simple eigenvalue must be separated from its neighbours by this
/// multiple of the solver tolerance.
pub const SIMPLICITY_FACTOR: f64 = 1e3;

/// Relative tolerance for matching a discrete eigenvalue to 2l(2l+1)K̂.
pub const EXACT_EIGEN_MATCH: f64 = 1e-2;

/// Default Newton residual tolerance (max norm).
pub const NEWTON_TOL: f64 = 1e-10;

/// Default Newton iteration cap.
pub const NEWTON_MAX_ITER: usize = 25;

/// Relative threshold for calling a curvature field nonconstant.
pub const NONCONSTANT_K: f64 = 1e-4;

/// Constant in the grid tolerance C·h² for residuals that involve
/// fourth derivatives of the conformal exponent. Calibrated by grid
/// refinement of branch points (see the residuals tests).
pub const GRID_C: f64 = 2.0;

/// Triangles with area below this fraction of the mean are degenerate.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Grid tolerance for a zonal grid with spacing `h`.
pub fn grid_tolerance(h: f64) -> f64 {
    GRID_C * h * h
}
