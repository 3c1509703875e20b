//! Small dense containers for scalar-generic tensor algebra.
//!
//! Dimensions are tiny (n ≤ 6), and coefficients are often jets rather than
//! plain reals, so these are straightforward `Vec`-backed types with a
//! Gauss–Jordan inverse pivoted on value coefficients. Plain `f64` matrices
//! interoperate with `nalgebra` for LU determinants, least squares and
//! eigenvalues.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct SquareMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Clone> SquareMatrix<T> {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn fill(n: usize, value: T) -> Self {
        Self {
            n,
            data: vec![value; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn map<U: Clone>(&self, mut f: impl FnMut(&T) -> U) -> SquareMatrix<U> {
        SquareMatrix::from_fn(self.n, |i, j| f(&self[(i, j)]))
    }
}

impl<T> Index<(usize, usize)> for SquareMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for SquareMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

impl SquareMatrix<f64> {
    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self[(i, j)])
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), |i, j| m[(i, j)])
    }
}

#[derive(Debug, Clone)]
pub struct Tensor3<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Clone> Tensor3<T> {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { n, data }
    }

    pub fn fill(n: usize, value: T) -> Self {
        Self {
            n,
            data: vec![value; n * n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn map<U: Clone>(&self, mut f: impl FnMut(&T) -> U) -> Tensor3<U> {
        Tensor3::from_fn(self.n, |i, j, k| f(&self[(i, j, k)]))
    }
}

impl Tensor3<f64> {
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Tensor3<f64>) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl<T> Index<(usize, usize, usize)> for Tensor3<T> {
    type Output = T;
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &T {
        &self.data[(i * self.n + j) * self.n + k]
    }
}

impl<T> IndexMut<(usize, usize, usize)> for Tensor3<T> {
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut T {
        &mut self.data[(i * self.n + j) * self.n + k]
    }
}

#[derive(Debug, Clone)]
pub struct Tensor4<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Clone> Tensor4<T> {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        data.push(f(i, j, k, l));
                    }
                }
            }
        }
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

impl Tensor4<f64> {
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl<T> Index<(usize, usize, usize, usize)> for Tensor4<T> {
    type Output = T;
    fn index(&self, (i, j, k, l): (usize, usize, usize, usize)) -> &T {
        &self.data[((i * self.n + j) * self.n + k) * self.n + l]
    }
}

impl<T> IndexMut<(usize, usize, usize, usize)> for Tensor4<T> {
    fn index_mut(&mut self, (i, j, k, l): (usize, usize, usize, usize)) -> &mut T {
        &mut self.data[((i * self.n + j) * self.n + k) * self.n + l]
    }
}

/// Gauss–Jordan inverse over any scalar ring, pivoting on the magnitude of
/// value coefficients. Returns the inverse together with the determinant.
///
/// Degeneracy thresholds are the caller's business; this only refuses exact
/// zero-value pivots (which would make the division undefined).
pub fn invert<S: Scalar>(m: &SquareMatrix<S>) -> Result<(SquareMatrix<S>, S)> {
    let n = m.n();
    let mut a = m.clone();
    let one = m[(0, 0)].lift(1.0);
    let mut inv = SquareMatrix::from_fn(n, |i, j| if i == j { one.clone() } else { one.lift(0.0) });
    let mut det = one.clone();

    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| {
                let v1 = a[(r1, col)].value().abs();
                let v2 = a[(r2, col)].value().abs();
                v1.partial_cmp(&v2).unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("non-empty pivot range");
        if a[(pivot_row, col)].value() == 0.0 {
            return Err(Error::Domain(format!(
                "singular matrix: zero pivot in column {col}"
            )));
        }
        if pivot_row != col {
            for j in 0..n {
                let tmp = a[(pivot_row, j)].clone();
                a[(pivot_row, j)] = a[(col, j)].clone();
                a[(col, j)] = tmp;
                let tmp = inv[(pivot_row, j)].clone();
                inv[(pivot_row, j)] = inv[(col, j)].clone();
                inv[(col, j)] = tmp;
            }
            det = -det;
        }
        let pivot = a[(col, col)].clone();
        det = det * pivot.clone();
        let pivot_inv = pivot.try_recip()?;
        for j in 0..n {
            a[(col, j)] = a[(col, j)].clone() * pivot_inv.clone();
            inv[(col, j)] = inv[(col, j)].clone() * pivot_inv.clone();
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[(row, col)].clone();
            if factor.is_constant() && factor.value() == 0.0 {
                continue;
            }
            for j in 0..n {
                a[(row, j)] = a[(row, j)].clone() - factor.clone() * a[(col, j)].clone();
                inv[(row, j)] = inv[(row, j)].clone() - factor.clone() * inv[(col, j)].clone();
            }
        }
    }
    Ok((inv, det))
}

/// Least-squares solution of an overdetermined dense system via SVD.
pub fn least_squares(a: &DMatrix<f64>, b: &nalgebra::DVector<f64>) -> Result<nalgebra::DVector<f64>> {
    let svd = a.clone().svd(true, true);
    svd.solve(b, 1e-13)
        .map_err(|e| Error::Numerical(format!("least squares failed: {e}")))
}
