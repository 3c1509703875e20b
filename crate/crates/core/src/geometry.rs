//! (Pseudo-)Riemannian tensor core.
//!
//! Metric and 1-form components are coordinate expressions. Every per-point
//! quantity (inverse metric, Levi-Civita connection, curvature, covariant
//! derivatives, pullbacks) is computed from jets of those components, so all
//! coordinate derivatives are exact. There is no discretization grid.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expr::{evaluate, ExprAst};
use crate::jet::{Jet, JetConfig};
use crate::linalg::{invert, SquareMatrix, Tensor3, Tensor4};
use crate::scalar::Scalar;
use crate::tol;

/// A point of the chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config(format!(
                "point coordinates must be finite, got {coords:?}"
            )));
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl std::ops::Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Seeds one jet per coordinate of `p`, order ≥ 1.
pub fn seed_point(p: &Point, order: usize) -> Result<Vec<Jet>> {
    let cfg = JetConfig::new(p.dim(), order)?;
    p.coords()
        .iter()
        .enumerate()
        .map(|(i, &x)| Jet::variable(cfg, i, x))
        .collect()
}

/// Anything that can hand out jets of symmetric metric components at a point.
///
/// Implemented by the expression-backed [`MetricField`] and by the
/// quadrature-backed metrizing metric of the kropina module.
pub trait MetricEval {
    fn dim(&self) -> usize;

    fn coordinates(&self) -> &[String];

    /// Jets of every component `a_ij` at `p`, carrying exact coordinate
    /// derivatives up to `order ≥ 1`.
    fn component_jets(&self, p: &Point, order: usize) -> Result<SquareMatrix<Jet>>;
}

/// Matrix-valued function of position defining a (pseudo-)Riemannian metric.
#[derive(Debug, Clone)]
pub struct MetricField {
    dim: usize,
    coords: Vec<String>,
    comps: SquareMatrix<ExprAst>,
    signature: Option<Vec<i8>>,
}

impl MetricField {
    /// Builds a metric from component expressions. Components must be
    /// structurally symmetric: `comps[(i,j)]` and `comps[(j,i)]` are the same
    /// tree.
    pub fn new(coords: Vec<String>, comps: SquareMatrix<ExprAst>) -> Result<Self> {
        let dim = coords.len();
        if dim < 3 {
            return Err(Error::Config(format!(
                "metric dimension must be at least 3, got {dim}"
            )));
        }
        if comps.n() != dim {
            return Err(Error::Config(format!(
                "metric has {0}x{0} components but {dim} coordinates",
                comps.n(),
            )));
        }
        for i in 0..dim {
            for j in 0..dim {
                comps[(i, j)].check_variables(&coords)?;
                if comps[(i, j)] != comps[(j, i)] {
                    return Err(Error::Config(format!(
                        "metric components ({i},{j}) and ({j},{i}) are not the same expression"
                    )));
                }
            }
        }
        Ok(Self {
            dim,
            coords,
            comps,
            signature: None,
        })
    }

    /// Parses a full matrix of component source strings.
    pub fn from_strings(coords: &[&str], comps: &[&[&str]]) -> Result<Self> {
        let dim = coords.len();
        if comps.len() != dim || comps.iter().any(|row| row.len() != dim) {
            return Err(Error::Config(
                "metric component matrix is not square".into(),
            ));
        }
        let mut parsed = Vec::with_capacity(dim * dim);
        for row in comps {
            for src in *row {
                parsed.push(ExprAst::parse_str(src)?);
            }
        }
        Self::new(
            coords.iter().map(|s| s.to_string()).collect(),
            SquareMatrix::from_fn(dim, |i, j| parsed[i * dim + j].clone()),
        )
    }

    /// Declares the expected signature (list of ±1), as metadata.
    pub fn with_signature(mut self, signs: Vec<i8>) -> Self {
        self.signature = Some(signs);
        self
    }

    pub fn signature(&self) -> Option<&[i8]> {
        self.signature.as_deref()
    }

    pub fn components(&self) -> &SquareMatrix<ExprAst> {
        &self.comps
    }

    /// Evaluates every component in an arbitrary scalar ring.
    pub fn eval_components<S: Scalar>(&self, values: &[S]) -> Result<SquareMatrix<S>> {
        let mut flat = Vec::with_capacity(self.dim * self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                flat.push(evaluate(&self.comps[(i, j)], &self.coords, values)?);
            }
        }
        Ok(SquareMatrix::from_fn(self.dim, |i, j| {
            flat[i * self.dim + j].clone()
        }))
    }
}

impl MetricEval for MetricField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn coordinates(&self) -> &[String] {
        &self.coords
    }

    fn component_jets(&self, p: &Point, order: usize) -> Result<SquareMatrix<Jet>> {
        if p.dim() != self.dim {
            return Err(Error::Config(format!(
                "point has dimension {} but metric has {}",
                p.dim(),
                self.dim
            )));
        }
        let seeds = seed_point(p, order)?;
        self.eval_components(&seeds)
    }
}

/// A 1-form field `b_i(x) dx^i`.
#[derive(Debug, Clone)]
pub struct OneFormField {
    dim: usize,
    coords: Vec<String>,
    comps: Vec<ExprAst>,
}

impl OneFormField {
    pub fn new(coords: Vec<String>, comps: Vec<ExprAst>) -> Result<Self> {
        let dim = coords.len();
        if comps.len() != dim {
            return Err(Error::Config(format!(
                "1-form has {} components but {dim} coordinates",
                comps.len()
            )));
        }
        for c in &comps {
            c.check_variables(&coords)?;
        }
        if comps.iter().all(|c| c.is_zero_const()) {
            return Err(Error::Config(
                "1-form must have at least one component that is not the zero constant".into(),
            ));
        }
        Ok(Self { dim, coords, comps })
    }

    pub fn from_strings(coords: &[&str], comps: &[&str]) -> Result<Self> {
        let parsed: Result<Vec<_>> = comps.iter().map(|s| ExprAst::parse_str(s)).collect();
        Self::new(coords.iter().map(|s| s.to_string()).collect(), parsed?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[ExprAst] {
        &self.comps
    }

    pub fn eval_components<S: Scalar>(&self, values: &[S]) -> Result<Vec<S>> {
        self.comps
            .iter()
            .map(|c| evaluate(c, &self.coords, values))
            .collect()
    }

    pub fn component_jets(&self, p: &Point, order: usize) -> Result<Vec<Jet>> {
        let seeds = seed_point(p, order)?;
        self.eval_components(&seeds)
    }
}

/// Coordinate transformation `x̃(x)`, one expression per target coordinate.
#[derive(Debug, Clone)]
pub struct CoordinateMap {
    source: Vec<String>,
    target: Vec<String>,
    exprs: Vec<ExprAst>,
}

impl CoordinateMap {
    pub fn new(source: Vec<String>, target: Vec<String>, exprs: Vec<ExprAst>) -> Result<Self> {
        if source.len() != target.len() || exprs.len() != source.len() {
            return Err(Error::Config(
                "coordinate map needs one expression per coordinate".into(),
            ));
        }
        for e in &exprs {
            e.check_variables(&source)?;
        }
        Ok(Self {
            source,
            target,
            exprs,
        })
    }

    pub fn from_strings(source: &[&str], target: &[&str], exprs: &[&str]) -> Result<Self> {
        let parsed: Result<Vec<_>> = exprs.iter().map(|s| ExprAst::parse_str(s)).collect();
        Self::new(
            source.iter().map(|s| s.to_string()).collect(),
            target.iter().map(|s| s.to_string()).collect(),
            parsed?,
        )
    }

    pub fn target_coordinates(&self) -> &[String] {
        &self.target
    }

    /// Image of `p` and the Jacobian `J^i_j = ∂x̃^i/∂x^j` at `p`.
    pub fn jacobian(&self, p: &Point) -> Result<(Point, DMatrix<f64>)> {
        let n = self.source.len();
        let seeds = seed_point(p, 1)?;
        let mut image = Vec::with_capacity(n);
        let mut jac = DMatrix::zeros(n, n);
        for (i, e) in self.exprs.iter().enumerate() {
            let jet = evaluate(e, &self.source, &seeds)?;
            image.push(jet.value());
            for j in 0..n {
                jac[(i, j)] = jet.partial(&[j])?;
            }
        }
        Ok((Point::new(image)?, jac))
    }
}

fn degeneracy_guard(det: f64, p: &Point) -> Result<()> {
    if !det.is_finite() || det.abs() <= tol::METRIC_DEGENERACY {
        return Err(Error::DegenerateMetric {
            det,
            at: format!("{:?}", p.coords()),
        });
    }
    Ok(())
}

/// Metric components at a point, gated on nondegeneracy.
pub fn metric_at(g: &impl MetricEval, p: &Point) -> Result<DMatrix<f64>> {
    let jets = g.component_jets(p, 1)?;
    let m = jets.map(|j| j.value()).to_dmatrix();
    degeneracy_guard(m.determinant(), p)?;
    Ok(m)
}

/// Jet-valued metric components carrying exact coordinate derivatives.
pub fn metric_jets(g: &impl MetricEval, p: &Point, order: usize) -> Result<SquareMatrix<Jet>> {
    let jets = g.component_jets(p, order)?;
    degeneracy_guard(jets.map(|j| j.value()).to_dmatrix().determinant(), p)?;
    Ok(jets)
}

/// Inverse of a metric value matrix.
pub fn inverse_metric(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let det = m.determinant();
    if !det.is_finite() || det.abs() <= tol::METRIC_DEGENERACY {
        return Err(Error::DegenerateMetric {
            det,
            at: "matrix".into(),
        });
    }
    m.clone().try_inverse().ok_or(Error::DegenerateMetric {
        det,
        at: "matrix".into(),
    })
}

/// Jets of the inverse metric components.
pub fn inverse_metric_jets(a: &SquareMatrix<Jet>, p: &Point) -> Result<SquareMatrix<Jet>> {
    degeneracy_guard(a.map(|j| j.value()).to_dmatrix().determinant(), p)?;
    let (inv, _det) = invert(a)?;
    Ok(inv)
}

/// Christoffel symbols of the second kind `Γ^k_ij` as jets of order `order`
/// (consumes metric jets of order `order + 1`). Layout: `[(k, i, j)]`.
pub fn christoffel_jets(g: &impl MetricEval, p: &Point, order: usize) -> Result<Tensor3<Jet>> {
    let a = metric_jets(g, p, order + 1)?;
    christoffel_from_metric_jets(&a, p)
}

/// Same, starting from already-evaluated metric component jets.
pub fn christoffel_from_metric_jets(
    a: &SquareMatrix<Jet>,
    p: &Point,
) -> Result<Tensor3<Jet>> {
    let n = a.n();
    let a_inv = inverse_metric_jets(a, p)?;

    let mut da = Vec::with_capacity(n * n * n); // ∂_k a_ij at [(i*n+j)*n+k]
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                da.push(a[(i, j)].derivative(k)?);
            }
        }
    }
    let da = Tensor3::from_fn(n, |i, j, k| da[(i * n + j) * n + k].clone());

    let zero = da[(0, 0, 0)].lift(0.0);
    let mut gamma = Tensor3::fill(n, zero.clone());
    for k in 0..n {
        for i in 0..n {
            for j in 0..=i {
                let mut s = zero.clone();
                for l in 0..n {
                    let bracket =
                        da[(j, l, i)].clone() + da[(i, l, j)].clone() - da[(i, j, l)].clone();
                    s.add_assign_prod(&a_inv[(k, l)], &bracket);
                }
                let half = s.scale(0.5);
                gamma[(k, i, j)] = half.clone();
                gamma[(k, j, i)] = half;
            }
        }
    }
    Ok(gamma)
}

/// Christoffel symbol values `Γ^k_ij` at `p`.
pub fn christoffel(g: &impl MetricEval, p: &Point) -> Result<Tensor3<f64>> {
    Ok(christoffel_jets(g, p, 0)?.map(|j| j.value()))
}

/// Covariant derivative of a 1-form: `nabla[(i, j)] = ∇_i b_j = ∂_i b_j − Γ^k_ij b_k`.
pub fn covariant_derivative_oneform(
    g: &impl MetricEval,
    b: &OneFormField,
    p: &Point,
) -> Result<DMatrix<f64>> {
    let n = g.dim();
    let gamma = christoffel(g, p)?;
    let b_jets = b.component_jets(p, 1)?;
    let b_vals: Vec<f64> = b_jets.iter().map(|j| j.value()).collect();
    let mut nabla = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut v = b_jets[j].partial(&[i])?;
            for k in 0..n {
                v -= gamma[(k, i, j)] * b_vals[k];
            }
            nabla[(i, j)] = v;
        }
    }
    Ok(nabla)
}

/// Curvature tensor and Ricci contraction of the Levi-Civita connection, in
/// the layout `riemann[(l, i, j, k)] = R_l{}^i{}_jk` with
/// `R_l{}^i{}_jk = ∂_j Γ^i_kl − ∂_k Γ^i_jl + Γ^i_mj Γ^m_kl − Γ^i_mk Γ^m_jl`
/// and `ricci[(l, k)] = R_l{}^i{}_ik`.
pub fn riemann_and_ricci(
    g: &impl MetricEval,
    p: &Point,
) -> Result<(Tensor4<f64>, DMatrix<f64>)> {
    let gamma = christoffel_jets(g, p, 1)?;
    curvature_from_connection(&gamma)
}

/// Curvature and Ricci of an arbitrary torsion-free connection given as
/// order-1 jets of its coefficients. Shared by the Levi-Civita route above
/// and by the affine connection of Berwald spaces.
pub fn curvature_from_connection(gamma: &Tensor3<Jet>) -> Result<(Tensor4<f64>, DMatrix<f64>)> {
    let n = gamma.n();
    let gamma_val = gamma.map(|j| j.value());
    let mut riemann = Tensor4::from_fn(n, |_, _, _, _| 0.0);
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..j {
                    let mut v =
                        gamma[(i, k, l)].partial(&[j])? - gamma[(i, j, l)].partial(&[k])?;
                    for m in 0..n {
                        v += gamma_val[(i, m, j)] * gamma_val[(m, k, l)]
                            - gamma_val[(i, m, k)] * gamma_val[(m, j, l)];
                    }
                    riemann[(l, i, j, k)] = v;
                    riemann[(l, i, k, j)] = -v;
                }
            }
        }
    }
    let mut ricci = DMatrix::zeros(n, n);
    for l in 0..n {
        for k in 0..n {
            let mut v = 0.0;
            for i in 0..n {
                v += riemann[(l, i, i, k)];
            }
            ricci[(l, k)] = v;
        }
    }
    Ok((riemann, ricci))
}

/// Number of positive and negative eigenvalues of a symmetric value matrix.
pub fn signature_counts(m: &DMatrix<f64>) -> (usize, usize) {
    let sym = nalgebra::SymmetricEigen::new(m.clone());
    let pos = sym.eigenvalues.iter().filter(|&&e| e > 0.0).count();
    let neg = sym.eigenvalues.iter().filter(|&&e| e < 0.0).count();
    (pos, neg)
}

/// Pullback of the metric along a coordinate map: `ã = J^{-T} a J^{-1}` at
/// `p`, expressed in the target coordinates. The eigenvalue sign counts are
/// checked to be unchanged.
pub fn transform_metric(
    g: &impl MetricEval,
    map: &CoordinateMap,
    p: &Point,
) -> Result<DMatrix<f64>> {
    let a = metric_at(g, p)?;
    let (_image, jac) = map.jacobian(p)?;
    let det = jac.determinant();
    if !det.is_finite() || det.abs() <= tol::JACOBIAN_DEGENERACY {
        return Err(Error::SingularJacobian { det });
    }
    let j_inv = jac.try_inverse().ok_or(Error::SingularJacobian { det })?;
    let transformed = j_inv.transpose() * &a * &j_inv;
    let before = signature_counts(&a);
    let after = signature_counts(&transformed);
    if before != after {
        return Err(Error::Numerical(format!(
            "metric signature changed under coordinate transformation: {before:?} -> {after:?}"
        )));
    }
    Ok(transformed)
}
