//! Numerical differential geometry for m-Kropina Finsler spaces.
//!
//! An m-Kropina space carries the Finsler function `F = α^(1+m) β^(-m)` built
//! from a (pseudo-)Riemannian metric `α` and a 1-form `β`. When `β` is closed
//! and null, this crate decides whether the space is of Berwald type, whether
//! the induced affine connection is locally metrizable, and, when it is,
//! constructs and verifies the metrizing conformal metric.
//!
//! All derivatives are exact: tensor fields are evaluated on truncated
//! multivariate Taylor values ([`jet::Jet`]), never finite-differenced.
//! Finite differences exist only inside test oracles.
//!
//! The crate is organized around the pipeline
//!
//! ```text
//! expr  ──>  geometry  ──>  kropina  (closed forms, verdicts)
//!   \          |               ^
//!    \         v               |  cross-checked against
//!     ──>   finsler  (generic Finsler pipeline, the numeric oracle)
//!               |
//!               v
//!           geodesics (spray integration)
//! ```
//!
//! driven by [`config`]/[`analysis`] for the `mkropina` command-line tool.

pub mod analysis;
pub mod config;
pub mod error;
pub mod expr;
pub mod finsler;
pub mod geodesics;
pub mod geometry;
pub mod jet;
pub mod kropina;
pub mod linalg;
pub mod report;
pub mod scalar;
pub mod tol;

pub use error::{Error, Result};
