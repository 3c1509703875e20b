//! Tolerance constants used by verdicts and cross-checks.
//!
//! Three tiers, each scaled by `1 + magnitude` at the point of use so the
//! thresholds are robust against the overall scale of the geometry:
//! structural verdicts on jet-exact quantities (1e-9), cross-checks between
//! independent computation routes (1e-8), and checks involving integrated
//! trajectories (1e-6).

/// Degeneracy gate on |det| of an n×n metric, n ≤ 6: roughly 100× the
/// double-precision epsilon accumulated by a 6×6 determinant.
pub const METRIC_DEGENERACY: f64 = 1e-12;

/// Gate on |det J| of a coordinate-map Jacobian.
pub const JACOBIAN_DEGENERACY: f64 = 1e-10;

/// Closed/null residuals of the defining 1-form.
pub const VALIDITY: f64 = 1e-10;

/// Structural verdicts on jet-exact quantities (Berwald least squares,
/// metrizability second derivatives).
pub const STRUCTURAL: f64 = 1e-9;

/// Agreement between two independent routes to the same tensor
/// (closed form vs. generic pipeline).
pub const CROSS_MODULE: f64 = 1e-8;

/// Spray consistency between the closed-form geodesic spray and the
/// non-linear connection contraction.
pub const SPRAY: f64 = 1e-7;

/// Checks along numerically integrated trajectories.
pub const TRAJECTORY: f64 = 1e-6;

/// Absolute tolerance of the adaptive quadrature building the conformal
/// factor of the metrizing metric.
pub const QUADRATURE_ABS: f64 = 1e-12;

/// `tol * (1 + magnitude)`: the unit-robust scaling applied to every
/// threshold above.
pub fn scaled(tol: f64, magnitude: f64) -> f64 {
    tol * (1.0 + magnitude.abs())
}
