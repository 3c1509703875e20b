//! Crate-wide error type.
//!
//! A single enum keeps cross-module pipelines (geometry → kropina → cli)
//! composable; the CLI maps variants onto its exit-code contract via
//! [`Error::exit_code`].

use thiserror::Error;

use crate::expr::SourceSpan;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Invalid configuration of a numeric object (bad jet order, wrong
    /// dimension, out-of-range variable index, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Illegal character or malformed number in an expression source.
    #[error("lex error at {span}: {msg}")]
    Lex { span: SourceSpan, msg: String },

    /// Structurally invalid expression.
    #[error("parse error at {span}: {msg}")]
    Parse { span: SourceSpan, msg: String },

    /// Expression evaluation failed (unbound variable, domain violation).
    #[error("evaluation error: {0}")]
    Eval(String),

    /// A derivative of total order above the configured jet order was
    /// requested. Never silently truncated to zero.
    #[error("derivative order {requested} exceeds configured jet order {order}")]
    OrderExceeded { requested: usize, order: usize },

    /// Scalar-domain violation: division by a zero value coefficient,
    /// logarithm/root/power of a non-positive value coefficient.
    #[error("domain error: {0}")]
    Domain(String),

    /// Metric determinant below the degeneracy gate at an evaluated point.
    #[error("degenerate metric: |det| = {det:.3e} at {at}")]
    DegenerateMetric { det: f64, at: String },

    /// Fundamental tensor degenerate at the evaluated (x, y).
    #[error("degenerate fundamental tensor: det g = {det:.3e}")]
    DegenerateFundamentalTensor { det: f64 },

    /// Coordinate-map Jacobian not invertible at the evaluated point.
    #[error("singular Jacobian: |det J| = {det:.3e}")]
    SingularJacobian { det: f64 },

    /// (x, y) outside the conic domain of the Finsler function.
    #[error("point outside the conic domain: {0}")]
    OutsideDomain(String),

    /// An operation requiring a Berwald space was invoked on a geometry whose
    /// Berwald certificate is negative.
    #[error("not a Berwald space: residual {residual:.3e}")]
    NotBerwald { residual: f64 },

    /// A precondition of the requested operation does not hold
    /// (metrization of a non-metrizable space, invalid initial data, ...).
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// Numerical failure (quadrature non-convergence, step-size underflow,
    /// step budget exhausted, least-squares breakdown).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Exit code used by the command-line tool: 1 configuration/parse errors,
    /// 2 verdict-precondition failures, 3 numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Lex { .. } | Error::Parse { .. } | Error::Io(_) => 1,
            Error::Precondition(_) | Error::NotBerwald { .. } => 2,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
