//! The scalar ring abstraction.
//!
//! Expression evaluation and all tensor algebra are written once, generic
//! over [`Scalar`]. Instances are plain `f64` and [`crate::jet::Jet<C>`] for
//! any scalar coefficient ring `C`; nesting jets in jets is how mixed
//! derivative orders beyond a single jet's truncation order are obtained.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// A commutative ring with the elementary functions needed by coordinate
/// expressions, plus enough introspection to police function domains.
///
/// Partial operations (division, log, sqrt, non-integer powers) return
/// `Err(Error::Domain)` instead of producing non-finite values.
pub trait Scalar:
    Clone
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    /// A constant with the same shape as `self` (same jet configuration).
    fn lift(&self, v: f64) -> Self;

    /// The value at the expansion point. For nested jets this recurses down
    /// to the innermost value coefficient.
    fn value(&self) -> f64;

    /// True when the scalar carries no derivative content.
    fn is_constant(&self) -> bool;

    /// Multiply by a plain real.
    fn scale(&self, k: f64) -> Self;

    /// Fused accumulate `self += a * b`. The jet implementation convolves in
    /// place; the default is fine for `f64`.
    fn add_assign_prod(&mut self, a: &Self, b: &Self) {
        *self = self.clone() + a.clone() * b.clone();
    }

    fn try_recip(&self) -> Result<Self>;

    fn try_div(&self, rhs: &Self) -> Result<Self>;

    fn exp(&self) -> Self;

    fn try_ln(&self) -> Result<Self>;

    fn sin(&self) -> Self;

    fn cos(&self) -> Self;

    fn tanh(&self) -> Self;

    fn try_sqrt(&self) -> Result<Self>;

    /// Real power. Requires a strictly positive value coefficient unless the
    /// exponent is integral, in which case [`Scalar::powi`] applies.
    fn try_powf(&self, p: f64) -> Result<Self>;

    /// Integer power by repeated multiplication; exact for polynomials and
    /// valid for negative bases. Negative exponents require an invertible
    /// value coefficient.
    fn powi(&self, n: i64) -> Result<Self>;
}

impl Scalar for f64 {
    fn lift(&self, v: f64) -> Self {
        v
    }

    fn value(&self) -> f64 {
        *self
    }

    fn is_constant(&self) -> bool {
        true
    }

    fn scale(&self, k: f64) -> Self {
        self * k
    }

    fn add_assign_prod(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }

    fn try_recip(&self) -> Result<Self> {
        if *self == 0.0 {
            return Err(Error::Domain("reciprocal of zero".into()));
        }
        Ok(1.0 / self)
    }

    fn try_div(&self, rhs: &Self) -> Result<Self> {
        if *rhs == 0.0 {
            return Err(Error::Domain("division by zero".into()));
        }
        Ok(self / rhs)
    }

    fn exp(&self) -> Self {
        f64::exp(*self)
    }

    fn try_ln(&self) -> Result<Self> {
        if *self <= 0.0 {
            return Err(Error::Domain(format!("log of non-positive value {self}")));
        }
        Ok(f64::ln(*self))
    }

    fn sin(&self) -> Self {
        f64::sin(*self)
    }

    fn cos(&self) -> Self {
        f64::cos(*self)
    }

    fn tanh(&self) -> Self {
        f64::tanh(*self)
    }

    fn try_sqrt(&self) -> Result<Self> {
        if *self < 0.0 {
            return Err(Error::Domain(format!("sqrt of negative value {self}")));
        }
        Ok(f64::sqrt(*self))
    }

    fn try_powf(&self, p: f64) -> Result<Self> {
        if p.fract() == 0.0 && p.abs() < 2f64.powi(31) {
            return self.powi(p as i64);
        }
        if *self <= 0.0 {
            return Err(Error::Domain(format!(
                "power {p} of non-positive base {self}"
            )));
        }
        Ok(f64::powf(*self, p))
    }

    fn powi(&self, n: i64) -> Result<Self> {
        if n < 0 && *self == 0.0 {
            return Err(Error::Domain("negative power of zero".into()));
        }
        Ok(f64::powi(*self, n as i32))
    }
}
