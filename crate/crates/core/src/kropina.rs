//! m-Kropina spaces `F = α^(1+m) β^(−m)` and their closed forms.
//!
//! For a closed null 1-form the Berwald property, the affine connection, the
//! skew part of the affine Ricci tensor, and local metrizability all reduce
//! to closed-form conditions in adapted null coordinates ([`KundtForm`]).
//! Everything here is cross-checked in the test suites against the generic
//! pipeline of [`crate::finsler`], which knows nothing about m-Kropina
//! structure.
//!
//! Index conventions follow the geometry module: `nabla[(i, j)] = ∇_i b_j`,
//! `gamma[(k, i, j)] = Γ^k_ij`, `ricci[(l, k)] = R_l{}^i{}_ik`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{BinaryOp, ExprAst};
use crate::finsler::FinslerFunction;
use crate::geometry::{
    christoffel_from_metric_jets, covariant_derivative_oneform, curvature_from_connection,
    inverse_metric, inverse_metric_jets, metric_at, metric_jets, seed_point, MetricEval,
    MetricField, OneFormField, Point,
};
use crate::jet::{Jet, JetConfig};
use crate::linalg::{least_squares, SquareMatrix, Tensor3, Tensor4};
use crate::scalar::Scalar;
use crate::tol;

/// The Finsler function of an m-Kropina structure, on the cone
/// `α² > 0 ∧ β > 0`.
#[derive(Debug, Clone)]
pub struct MKropinaFinsler {
    pub metric: MetricField,
    pub oneform: OneFormField,
    pub m: f64,
}

impl MKropinaFinsler {
    pub fn alpha_squared<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        let a = self.metric.eval_components(x)?;
        let n = self.metric.dim();
        let mut a2 = x[0].lift(0.0);
        for i in 0..n {
            for j in 0..n {
                a2.add_assign_prod(&(a[(i, j)].clone() * y[i].clone()), &y[j]);
            }
        }
        Ok(a2)
    }

    pub fn beta<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        let b = self.oneform.eval_components(x)?;
        let mut beta = x[0].lift(0.0);
        for (bi, yi) in b.iter().zip(y) {
            beta.add_assign_prod(bi, yi);
        }
        Ok(beta)
    }
}

impl FinslerFunction for MKropinaFinsler {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn f_squared<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        let a2 = self.alpha_squared(x, y)?;
        let beta = self.beta(x, y)?;
        Ok(a2.try_powf(1.0 + self.m)? * beta.try_powf(-2.0 * self.m)?)
    }

    fn in_domain(&self, x: &[f64], y: &[f64]) -> bool {
        let a2 = match self.alpha_squared(&x.to_vec()[..], &y.to_vec()[..]) {
            Ok(v) => v,
            Err(_) => return false,
        };
        let beta = match self.beta(&x.to_vec()[..], &y.to_vec()[..]) {
            Ok(v) => v,
            Err(_) => return false,
        };
        a2 > 0.0 && beta > 0.0
    }
}

/// An m-Kropina space `(a, b, m)` with construction-time validity checks.
#[derive(Debug, Clone)]
pub struct MKropinaSpace {
    metric: MetricField,
    oneform: OneFormField,
    m: f64,
    n: usize,
}

impl MKropinaSpace {
    /// `n > 2` and, for `m = 1`, the 1-form must not be null everywhere:
    /// with `m = 1` and `b² = 0` the fundamental tensor degenerates
    /// identically and no Finsler space exists. Nullity is probed at the
    /// supplied points.
    pub fn new(
        metric: MetricField,
        oneform: OneFormField,
        m: f64,
        probe: &[Point],
    ) -> Result<Self> {
        let n = metric.dim();
        if oneform.dim() != n {
            return Err(Error::Config(format!(
                "1-form dimension {} does not match metric dimension {n}",
                oneform.dim()
            )));
        }
        if n <= 2 {
            return Err(Error::Config(format!(
                "m-Kropina analysis requires dimension > 2, got {n}"
            )));
        }
        if m == 1.0 {
            if probe.is_empty() {
                return Err(Error::Config(
                    "m = 1 requires probe points to rule out a null 1-form".into(),
                ));
            }
            let mut max_b2 = 0.0f64;
            for p in probe {
                let a = metric_at(&metric, p)?;
                let a_inv = inverse_metric(&a)?;
                let b: Vec<f64> = oneform
                    .component_jets(p, 1)?
                    .iter()
                    .map(|j| j.value())
                    .collect();
                let mut b2 = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        b2 += a_inv[(i, j)] * b[i] * b[j];
                    }
                }
                max_b2 = max_b2.max(b2.abs());
            }
            if max_b2 <= tol::VALIDITY {
                return Err(Error::Config(
                    "m = 1 with a null 1-form does not define a Finsler space \
                     (the fundamental tensor is degenerate everywhere)"
                        .into(),
                ));
            }
        }
        Ok(Self {
            metric,
            oneform,
            m,
            n,
        })
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn oneform(&self) -> &OneFormField {
        &self.oneform
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn finsler(&self) -> MKropinaFinsler {
        MKropinaFinsler {
            metric: self.metric.clone(),
            oneform: self.oneform.clone(),
            m: self.m,
        }
    }

    /// Closed form for `det g / det a`:
    /// `(1+m)^(n−1) (α²)^(mn) (β²)^(−(mn+1)) ((1−m)β² + m b² α²)`.
    pub fn det_ratio_closed_form(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let f = self.finsler();
        let a2 = f.alpha_squared(&x.to_vec()[..], &y.to_vec()[..])?;
        let beta = f.beta(&x.to_vec()[..], &y.to_vec()[..])?;
        if a2 <= 0.0 || beta == 0.0 {
            return Err(Error::OutsideDomain(format!(
                "α² = {a2}, β = {beta} at x = {x:?}, y = {y:?}"
            )));
        }
        let p = Point::new(x.to_vec())?;
        let a = metric_at(&self.metric, &p)?;
        let a_inv = inverse_metric(&a)?;
        let b: Vec<f64> = self
            .oneform
            .component_jets(&p, 1)?
            .iter()
            .map(|j| j.value())
            .collect();
        let mut b2 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                b2 += a_inv[(i, j)] * b[i] * b[j];
            }
        }
        let m = self.m;
        let nf = self.n as f64;
        let mn = m * nf;
        Ok((1.0 + m).powi(self.n as i32 - 1)
            * a2.powf(mn)
            * (beta * beta).powf(-(mn + 1.0))
            * ((1.0 - m) * beta * beta + m * b2 * a2))
    }
}

/// Closed/null validity of the defining 1-form over a point sample.
#[derive(Debug, Clone)]
pub struct Validity {
    pub closed: bool,
    pub null: bool,
    pub closed_residual: f64,
    pub null_residual: f64,
    pub tolerance: f64,
}

/// Checks `db = 0` and `b² = a^{ij} b_i b_j = 0` at every sample point.
/// Requires at least 20 points so the verdict is not a fluke of a special
/// slice.
pub fn validate(space: &MKropinaSpace, points: &[Point]) -> Result<Validity> {
    if points.len() < 20 {
        return Err(Error::Precondition(format!(
            "validity check needs at least 20 sample points, got {}",
            points.len()
        )));
    }
    let n = space.n;
    let mut closed_residual = 0.0f64;
    let mut null_residual = 0.0f64;
    for p in points {
        let b_jets = space.oneform.component_jets(p, 1)?;
        for i in 0..n {
            for j in 0..i {
                let curl = b_jets[j].partial(&[i])? - b_jets[i].partial(&[j])?;
                closed_residual = closed_residual.max(curl.abs());
            }
        }
        let a = metric_at(&space.metric, p)?;
        let a_inv = inverse_metric(&a)?;
        let b: Vec<f64> = b_jets.iter().map(|j| j.value()).collect();
        let mut b2 = 0.0;
        for i in 0..n {
            for j in 0..n {
                b2 += a_inv[(i, j)] * b[i] * b[j];
            }
        }
        null_residual = null_residual.max(b2.abs());
    }
    Ok(Validity {
        closed: closed_residual <= tol::VALIDITY,
        null: null_residual <= tol::VALIDITY,
        closed_residual,
        null_residual,
        tolerance: tol::VALIDITY,
    })
}

/// Berwald condition specialized to a closed null 1-form:
/// `∇_j b_i = c (1−m) b_i b_j` solved for the scalar `c` by least squares.
#[derive(Debug, Clone)]
pub struct ClosedBerwald {
    pub holds: bool,
    pub c: f64,
    pub residual: f64,
    pub tolerance: f64,
}

pub fn berwald_condition_closed(space: &MKropinaSpace, p: &Point) -> Result<ClosedBerwald> {
    if space.m == 1.0 {
        return Err(Error::Config(
            "the closed-form Berwald condition divides by 1 − m; m = 1 is excluded".into(),
        ));
    }
    let n = space.n;
    let nabla = covariant_derivative_oneform(&space.metric, &space.oneform, p)?;
    let b: Vec<f64> = space
        .oneform
        .component_jets(p, 1)?
        .iter()
        .map(|j| j.value())
        .collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        for j in 0..n {
            let t = (1.0 - space.m) * b[i] * b[j];
            num += nabla[(i, j)] * t;
            den += t * t;
        }
    }
    if den == 0.0 {
        return Err(Error::Numerical(
            "cannot fit c: the 1-form vanishes at the sample point".into(),
        ));
    }
    let c = num / den;
    let mut residual = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let model = c * (1.0 - space.m) * b[i] * b[j];
            residual = residual.max((nabla[(i, j)] - model).abs());
            scale = scale.max(nabla[(i, j)].abs());
        }
    }
    let tolerance = tol::scaled(tol::STRUCTURAL, scale);
    Ok(ClosedBerwald {
        holds: residual <= tolerance,
        c,
        residual,
        tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    /// `∇b = 0`: the affine connection is the Levi-Civita connection of `a`.
    Parallel,
    /// Closed null 1-form with `∇_j b_i = c(1−m) b_i b_j`.
    ClosedNullWithC,
    /// General Berwald condition `∇_j b_i = m(f·b) a_ij + b_i f_j − m f_i b_j`.
    GeneralWithF,
    NotBerwald,
}

impl CertificateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CertificateKind::Parallel => "parallel",
            CertificateKind::ClosedNullWithC => "closed-null-with-c",
            CertificateKind::GeneralWithF => "general-with-f",
            CertificateKind::NotBerwald => "not-berwald",
        }
    }
}

/// Pointwise Berwald certificate from the general condition, solved for the
/// covector `f` by least squares over the n² component equations.
#[derive(Debug, Clone)]
pub struct BerwaldCertificate {
    pub kind: CertificateKind,
    pub c: Option<f64>,
    pub f: Option<Vec<f64>>,
    pub residual: f64,
    pub tolerance: f64,
}

pub fn berwald_condition_general(space: &MKropinaSpace, p: &Point) -> Result<BerwaldCertificate> {
    let n = space.n;
    let m = space.m;
    let nabla = covariant_derivative_oneform(&space.metric, &space.oneform, p)?;
    let a = metric_at(&space.metric, p)?;
    let a_inv = inverse_metric(&a)?;
    let b_jets = space.oneform.component_jets(p, 1)?;
    let b: Vec<f64> = b_jets.iter().map(|j| j.value()).collect();
    let b_up: Vec<f64> = (0..n)
        .map(|k| (0..n).map(|l| a_inv[(k, l)] * b[l]).sum())
        .collect();

    // Row (i, j) of the design matrix expresses ∇_j b_i; the unknowns are f_k.
    let mut design = DMatrix::zeros(n * n, n);
    let mut rhs = DVector::zeros(n * n);
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            rhs[row] = nabla[(j, i)];
            for k in 0..n {
                let mut coeff = m * b_up[k] * a[(i, j)];
                if k == j {
                    coeff += b[i];
                }
                if k == i {
                    coeff -= m * b[j];
                }
                design[(row, k)] = coeff;
            }
        }
    }
    let f = least_squares(&design, &rhs)?;
    let fitted = &design * &f;
    let residual = (fitted - &rhs).amax();
    let scale = nabla.amax();
    let tolerance = tol::scaled(tol::STRUCTURAL, scale);

    if residual > tolerance {
        return Ok(BerwaldCertificate {
            kind: CertificateKind::NotBerwald,
            c: None,
            f: None,
            residual,
            tolerance,
        });
    }
    if scale <= tolerance {
        return Ok(BerwaldCertificate {
            kind: CertificateKind::Parallel,
            c: Some(0.0),
            f: Some(vec![0.0; n]),
            residual,
            tolerance,
        });
    }

    // Closed & null at this point, and f ∝ b, collapse to the scalar form.
    let mut curl = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            curl = curl.max((b_jets[j].partial(&[i])? - b_jets[i].partial(&[j])?).abs());
        }
    }
    let b2: f64 = (0..n).map(|i| b_up[i] * b[i]).sum();
    let bb: f64 = b.iter().map(|v| v * v).sum();
    if curl <= tol::VALIDITY && b2.abs() <= tol::VALIDITY && bb > 0.0 {
        let c = f.iter().zip(&b).map(|(fi, bi)| fi * bi).sum::<f64>() / bb;
        let off_parallel = f
            .iter()
            .zip(&b)
            .map(|(fi, bi)| (fi - c * bi).abs())
            .fold(0.0f64, f64::max);
        if off_parallel <= tolerance {
            return Ok(BerwaldCertificate {
                kind: CertificateKind::ClosedNullWithC,
                c: Some(c),
                f: Some(f.iter().cloned().collect()),
                residual,
                tolerance,
            });
        }
    }
    Ok(BerwaldCertificate {
        kind: CertificateKind::GeneralWithF,
        c: None,
        f: Some(f.iter().cloned().collect()),
        residual,
        tolerance,
    })
}

/// Adapted null coordinates: `a = −2dudv + H du² + W_a du dx^a + h_ab dx^a dx^b`
/// with `b = du`, where `W` and `h` must not involve `v`.
#[derive(Debug, Clone)]
pub struct KundtForm {
    coords: Vec<String>,
    h_uu: ExprAst,
    w: Vec<ExprAst>,
    h: SquareMatrix<ExprAst>,
    n: usize,
}

impl KundtForm {
    pub fn new(
        coords: Vec<String>,
        h_uu: ExprAst,
        w: Vec<ExprAst>,
        h: SquareMatrix<ExprAst>,
    ) -> Result<Self> {
        let n = coords.len();
        if n < 3 {
            return Err(Error::Config(format!(
                "adapted coordinates need dimension > 2, got {n}"
            )));
        }
        if w.len() != n - 2 || h.n() != n - 2 {
            return Err(Error::Config(format!(
                "expected {} transverse components, got W: {}, h: {}x{}",
                n - 2,
                w.len(),
                h.n(),
                h.n()
            )));
        }
        h_uu.check_variables(&coords)?;
        let v_name = coords[1].clone();
        let transverse_ok = |e: &ExprAst, what: &str| -> Result<()> {
            e.check_variables(&coords)?;
            if e.variables().contains(&v_name) {
                return Err(Error::Config(format!(
                    "{what} must not depend on the null coordinate `{v_name}`"
                )));
            }
            Ok(())
        };
        for (a, e) in w.iter().enumerate() {
            transverse_ok(e, &format!("W[{a}]"))?;
        }
        for a in 0..n - 2 {
            for b in 0..n - 2 {
                transverse_ok(&h[(a, b)], &format!("h[{a}][{b}]"))?;
                if h[(a, b)] != h[(b, a)] {
                    return Err(Error::Config(format!(
                        "transverse metric components ({a},{b}) and ({b},{a}) differ"
                    )));
                }
            }
        }
        Ok(Self {
            coords,
            h_uu,
            w,
            h,
            n,
        })
    }

    pub fn from_strings(coords: &[&str], h_uu: &str, w: &[&str], h: &[&[&str]]) -> Result<Self> {
        let k = coords.len().saturating_sub(2);
        if h.len() != k || h.iter().any(|r| r.len() != k) {
            return Err(Error::Config(
                "transverse metric component matrix is not square".into(),
            ));
        }
        let mut h_parsed = Vec::with_capacity(k * k);
        for row in h {
            for src in *row {
                h_parsed.push(ExprAst::parse_str(src)?);
            }
        }
        let w_parsed: Result<Vec<_>> = w.iter().map(|s| ExprAst::parse_str(s)).collect();
        Self::new(
            coords.iter().map(|s| s.to_string()).collect(),
            ExprAst::parse_str(h_uu)?,
            w_parsed?,
            SquareMatrix::from_fn(k, |i, j| h_parsed[i * k + j].clone()),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coordinates(&self) -> &[String] {
        &self.coords
    }

    pub fn h_uu(&self) -> &ExprAst {
        &self.h_uu
    }

    /// The metric field `a` in these coordinates. The symmetrized product
    /// convention makes `a_ua = W_a / 2`.
    pub fn metric_field(&self) -> Result<MetricField> {
        let n = self.n;
        let half = |e: &ExprAst| {
            ExprAst::Binary(
                BinaryOp::Mul,
                Box::new(ExprAst::Const(0.5)),
                Box::new(e.clone()),
            )
        };
        let comps = SquareMatrix::from_fn(n, |i, j| match (i, j) {
            (0, 0) => self.h_uu.clone(),
            (0, 1) | (1, 0) => ExprAst::Const(-1.0),
            (0, a) => half(&self.w[a - 2]),
            (a, 0) => half(&self.w[a - 2]),
            (1, _) | (_, 1) => ExprAst::Const(0.0),
            (a, b) => self.h[(a - 2, b - 2)].clone(),
        });
        MetricField::new(self.coords.clone(), comps)
    }

    /// `b = du`.
    pub fn oneform(&self) -> Result<OneFormField> {
        let mut comps = vec![ExprAst::Const(0.0); self.n];
        comps[0] = ExprAst::Const(1.0);
        OneFormField::new(self.coords.clone(), comps)
    }

    pub fn space(&self, m: f64) -> Result<MKropinaSpace> {
        if m == 1.0 {
            return Err(Error::Config(
                "m = 1 with a null 1-form does not define a Finsler space \
                 (the fundamental tensor is degenerate everywhere)"
                    .into(),
            ));
        }
        MKropinaSpace::new(self.metric_field()?, self.oneform()?, m, &[])
    }

    /// Jets of `H` at `p`.
    pub fn h_jets(&self, p: &Point, order: usize) -> Result<Jet> {
        let seeds = seed_point(p, order)?;
        crate::expr::evaluate(&self.h_uu, &self.coords, &seeds)
    }

    /// `φ = ∂_v H` at `p` (constant in `v` and the transverse coordinates
    /// exactly when the geometry is metrizable).
    pub fn phi_at(&self, p: &Point) -> Result<f64> {
        self.h_jets(p, 1)?.partial(&[1])
    }
}

/// Affine connection coefficients in adapted coordinates, as jets:
/// `Γ^k_ij = αΓ^k_ij + m/(2(1−m)) ∂_v H (a_ij δ^k_v + δ^k_j δ^u_i + δ^k_i δ^u_j)`.
pub fn affine_connection_kundt_jets(
    kundt: &KundtForm,
    m: f64,
    p: &Point,
    order: usize,
) -> Result<Tensor3<Jet>> {
    if m == 1.0 {
        return Err(Error::Config(
            "the affine connection divides by 1 − m; m = 1 is excluded".into(),
        ));
    }
    let n = kundt.n;
    let metric = kundt.metric_field()?;
    let a = metric_jets(&metric, p, order + 1)?;
    let mut gamma = christoffel_from_metric_jets(&a, p)?;
    let dv_h = kundt.h_jets(p, order + 1)?.derivative(1)?;
    let kappa = m / (2.0 * (1.0 - m));
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut pattern = dv_h.lift(0.0);
                if k == 1 {
                    pattern = pattern + a[(i, j)].clone();
                }
                if k == j && i == 0 {
                    pattern = pattern + dv_h.lift(1.0);
                }
                if k == i && j == 0 {
                    pattern = pattern + dv_h.lift(1.0);
                }
                gamma[(k, i, j)] =
                    gamma[(k, i, j)].clone() + (dv_h.clone() * pattern).scale(kappa);
            }
        }
    }
    Ok(gamma)
}

/// Affine connection values in adapted coordinates.
pub fn affine_connection_kundt(kundt: &KundtForm, m: f64, p: &Point) -> Result<Tensor3<f64>> {
    Ok(affine_connection_kundt_jets(kundt, m, p, 0)?.map(|j| j.value()))
}

/// Affine connection values for a general space through its Berwald
/// certificate: `Γ^ℓ_ij = αΓ^ℓ_ij + m a^{ℓk}(a_ij f_k − a_jk f_i − a_ki f_j)`.
pub fn affine_connection_space(space: &MKropinaSpace, p: &Point) -> Result<Tensor3<f64>> {
    if space.m == 1.0 {
        return Err(Error::Config(
            "the affine connection divides by 1 − m; m = 1 is excluded".into(),
        ));
    }
    let cert = berwald_condition_general(space, p)?;
    if cert.kind == CertificateKind::NotBerwald {
        return Err(Error::NotBerwald {
            residual: cert.residual,
        });
    }
    let f = cert.f.expect("positive certificate carries f");
    let n = space.n;
    let metric_jets_ = metric_jets(&space.metric, p, 1)?;
    let mut gamma = christoffel_from_metric_jets(&metric_jets_, p)?.map(|j| j.value());
    let a = metric_jets_.map(|j| j.value());
    let a_inv = inverse_metric(&a.to_dmatrix())?;
    let m = space.m;
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut corr = 0.0;
                for k in 0..n {
                    corr += a_inv[(l, k)]
                        * (a[(i, j)] * f[k] - a[(j, k)] * f[i] - a[(k, i)] * f[j]);
                }
                gamma[(l, i, j)] += m * corr;
            }
        }
    }
    Ok(gamma)
}

/// Affine connection as jets for a general closed-null space, with the
/// scalar `c(x)` recovered pointwise in jet arithmetic from
/// `∇_j b_i = c(1−m) b_i b_j`. Valid wherever the space is Berwald with a
/// closed null 1-form.
pub fn affine_connection_closed_null_jets(
    space: &MKropinaSpace,
    p: &Point,
    order: usize,
) -> Result<Tensor3<Jet>> {
    if space.m == 1.0 {
        return Err(Error::Config(
            "the affine connection divides by 1 − m; m = 1 is excluded".into(),
        ));
    }
    let n = space.n;
    let m = space.m;
    let a = metric_jets(&space.metric, p, order + 1)?;
    let a_inv = inverse_metric_jets(&a, p)?;
    let lc = christoffel_from_metric_jets(&a, p)?;
    let seeds = seed_point(p, order + 1)?;
    let b = space.oneform.eval_components(&seeds)?;

    // ∇_i b_j as jets.
    let zero = a[(0, 0)].lift(0.0);
    let mut nabla = SquareMatrix::fill(n, zero.clone());
    for i in 0..n {
        for j in 0..n {
            let mut v = b[j].derivative(i)?;
            for k in 0..n {
                v = v - lc[(k, i, j)].clone() * b[k].clone();
            }
            nabla[(i, j)] = v;
        }
    }

    // c = Σ ∇b_ij T_ij / Σ T_ij², T = (1−m) b⊗b.
    let mut num = zero.clone();
    let mut den = zero.clone();
    for i in 0..n {
        for j in 0..n {
            let t = (b[i].clone() * b[j].clone()).scale(1.0 - m);
            num.add_assign_prod(&nabla[(i, j)], &t);
            den.add_assign_prod(&t, &t);
        }
    }
    if den.value() == 0.0 {
        return Err(Error::Numerical(
            "cannot fit c: the 1-form vanishes at the sample point".into(),
        ));
    }
    let c = num.try_div(&den)?;

    let mut b_up = vec![zero.clone(); n];
    for l in 0..n {
        let mut s = zero.clone();
        for k in 0..n {
            s.add_assign_prod(&a_inv[(l, k)], &b[k]);
        }
        b_up[l] = s;
    }

    let mut gamma = lc;
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut pattern = a[(i, j)].clone() * b_up[l].clone();
                if l == j {
                    pattern = pattern - b[i].clone();
                }
                if l == i {
                    pattern = pattern - b[j].clone();
                }
                gamma[(l, i, j)] = gamma[(l, i, j)].clone() + (c.clone() * pattern).scale(m);
            }
        }
    }
    Ok(gamma)
}

/// Affine curvature data: brute-force contraction of the connection jets,
/// and in adapted coordinates also the closed-form skew part.
#[derive(Debug, Clone)]
pub struct AffineCurvature {
    pub riemann: Tensor4<f64>,
    pub ricci: DMatrix<f64>,
    /// `½(R̄_ij − R̄_ji)`.
    pub skew: DMatrix<f64>,
    pub skew_max: f64,
    /// Closed-form skew part (adapted coordinates only).
    pub closed_form_skew: Option<DMatrix<f64>>,
    /// Max-abs disagreement between the two routes.
    pub agreement: Option<f64>,
}

fn skew_part(ricci: &DMatrix<f64>) -> DMatrix<f64> {
    (ricci - ricci.transpose()).scale(0.5)
}

/// `R̄_[ij] = −(m n/(4(1−m)))(δ^u_i ∂_j ∂_v H − δ^u_j ∂_i ∂_v H)`.
pub fn skew_ricci_closed_form(kundt: &KundtForm, m: f64, p: &Point) -> Result<DMatrix<f64>> {
    let n = kundt.n;
    let h = kundt.h_jets(p, 2)?;
    let coeff = -(m * n as f64) / (4.0 * (1.0 - m));
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let ddvh = h.partial(&[j, 1])?;
        out[(0, j)] += coeff * ddvh;
        out[(j, 0)] -= coeff * ddvh;
    }
    Ok(out)
}

pub fn affine_curvature_kundt(kundt: &KundtForm, m: f64, p: &Point) -> Result<AffineCurvature> {
    let gamma = affine_connection_kundt_jets(kundt, m, p, 1)?;
    let (riemann, ricci) = curvature_from_connection(&gamma)?;
    let skew = skew_part(&ricci);
    let closed = skew_ricci_closed_form(kundt, m, p)?;
    let agreement = (&skew - &closed).amax();
    Ok(AffineCurvature {
        riemann,
        ricci,
        skew_max: skew.amax(),
        skew,
        closed_form_skew: Some(closed),
        agreement: Some(agreement),
    })
}

pub fn affine_curvature_space(space: &MKropinaSpace, p: &Point) -> Result<AffineCurvature> {
    let gamma = affine_connection_closed_null_jets(space, p, 1)?;
    let (riemann, ricci) = curvature_from_connection(&gamma)?;
    let skew = skew_part(&ricci);
    Ok(AffineCurvature {
        riemann,
        ricci,
        skew_max: skew.amax(),
        skew,
        closed_form_skew: None,
        agreement: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Metrizable,
    NotMetrizable,
    NotBerwald,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Metrizable => "metrizable",
            Verdict::NotMetrizable => "not-metrizable",
            Verdict::NotBerwald => "not-berwald",
        }
    }
}

/// Metrizability analysis over a grid in adapted coordinates.
#[derive(Debug, Clone)]
pub struct MetrizabilityReport {
    pub verdict: Verdict,
    /// `max |∂_v² H|` over the grid.
    pub s1: f64,
    /// `max_a |∂_v ∂_a H|` over the grid.
    pub s2: f64,
    /// `max |∂_v H|`, the scale entering the tolerance.
    pub dv_h_max: f64,
    pub tolerance: f64,
    pub ricci_skew_max: f64,
    /// `(u, φ(u))` samples when metrizable.
    pub phi_samples: Vec<(f64, f64)>,
}

/// `H` must be linear in `v` with a coefficient depending on `u` alone;
/// equivalently `∂_v²H = 0` and `∂_v ∂_a H = 0`. Both residuals and the
/// skew affine Ricci maximum are measured over the grid.
pub fn metrizability_verdict(
    kundt: &KundtForm,
    m: f64,
    grid: &[Point],
) -> Result<MetrizabilityReport> {
    if grid.is_empty() {
        return Err(Error::Precondition(
            "metrizability verdict needs a non-empty sample grid".into(),
        ));
    }
    let n = kundt.n;
    let mut s1 = 0.0f64;
    let mut s2 = 0.0f64;
    let mut dv_h_max = 0.0f64;
    let mut ricci_skew_max = 0.0f64;
    let mut phi_samples = Vec::with_capacity(grid.len());
    for p in grid {
        let h = kundt.h_jets(p, 2)?;
        s1 = s1.max(h.partial(&[1, 1])?.abs());
        for a in 2..n {
            s2 = s2.max(h.partial(&[1, a])?.abs());
        }
        let phi = h.partial(&[1])?;
        dv_h_max = dv_h_max.max(phi.abs());
        phi_samples.push((p[0], phi));
        let curv = affine_curvature_kundt(kundt, m, p)?;
        ricci_skew_max = ricci_skew_max.max(curv.skew_max);
    }
    let tolerance = tol::scaled(tol::STRUCTURAL, dv_h_max);
    let metrizable = s1.max(s2) <= tolerance;
    if !metrizable {
        phi_samples.clear();
    }
    Ok(MetrizabilityReport {
        verdict: if metrizable {
            Verdict::Metrizable
        } else {
            Verdict::NotMetrizable
        },
        s1,
        s2,
        dv_h_max,
        tolerance,
        ricci_skew_max,
        phi_samples,
    })
}

/// Adaptive Simpson quadrature of a vector-valued integrand, sup-norm error
/// control, absolute tolerance.
fn adaptive_simpson_vec(
    f: &impl Fn(f64) -> Result<Vec<f64>>,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    fn simpson(fa: &[f64], fm: &[f64], fb: &[f64], h: f64) -> Vec<f64> {
        fa.iter()
            .zip(fm)
            .zip(fb)
            .map(|((&va, &vm), &vb)| h / 6.0 * (va + 4.0 * vm + vb))
            .collect()
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &impl Fn(f64) -> Result<Vec<f64>>,
        a: f64,
        b: f64,
        fa: &[f64],
        fm: &[f64],
        fb: &[f64],
        whole: &[f64],
        tol: f64,
        depth: usize,
    ) -> Result<Vec<f64>> {
        let m = 0.5 * (a + b);
        let flm = f(0.5 * (a + m))?;
        let frm = f(0.5 * (m + b))?;
        let left = simpson(fa, &flm, fm, m - a);
        let right = simpson(fm, &frm, fb, b - m);
        let err: Vec<f64> = left
            .iter()
            .zip(&right)
            .zip(whole)
            .map(|((&l, &r), &w)| l + r - w)
            .collect();
        let err_max = err.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
        if err_max <= 15.0 * tol || depth >= 40 {
            if depth >= 40 && err_max > 15.0 * tol {
                return Err(Error::Numerical(format!(
                    "quadrature failed to converge on [{a}, {b}]: error estimate {err_max:.3e}"
                )));
            }
            return Ok(left
                .iter()
                .zip(&right)
                .zip(&err)
                .map(|((&l, &r), &e)| l + r + e / 15.0)
                .collect());
        }
        let lhs = rec(f, a, m, fa, &flm, fm, &left, tol / 2.0, depth + 1)?;
        let rhs = rec(f, m, b, fm, &frm, fb, &right, tol / 2.0, depth + 1)?;
        Ok(lhs.iter().zip(&rhs).map(|(&l, &r)| l + r).collect())
    }
    let fa = f(a)?;
    if a == b {
        return Ok(vec![0.0; fa.len()]);
    }
    let sign = if b > a { 1.0 } else { -1.0 };
    let (a, b, fa, fb) = if b > a {
        let fb = f(b)?;
        (a, b, fa, fb)
    } else {
        let fb = f(b)?;
        (b, a, fb, fa)
    };
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = simpson(&fa, &fm, &fb, b - a);
    let out = rec(f, a, b, &fa, &fm, &fb, &whole, tol.max(1e-15), 0)?;
    Ok(out.into_iter().map(|v| sign * v).collect())
}

/// The metrizing metric `ã = exp(m/(1−m) ∫_{u0}^{u} φ) · a`, evaluable like
/// any other metric: the conformal exponent's value comes from adaptive
/// quadrature, its derivatives from jets of `φ = ∂_v H`.
#[derive(Debug, Clone)]
pub struct MetrizedMetric {
    base: MetricField,
    kundt: KundtForm,
    m: f64,
    u0: f64,
    /// Multiplier on the conformal exponent. 1 for the actual metrizing
    /// metric; other values deliberately spoil it (negative controls).
    exponent_scale: f64,
}

impl MetrizedMetric {
    pub fn u0(&self) -> f64 {
        self.u0
    }

    /// A deliberately wrong variant, scaling the conformal exponent.
    pub fn with_exponent_scale(mut self, scale: f64) -> Self {
        self.exponent_scale = scale;
        self
    }

    fn kappa(&self) -> f64 {
        self.exponent_scale * self.m / (1.0 - self.m)
    }

    /// The exponent field is `ψ(u, v, x) = κ ∫_{u0}^{u} φ(s, v, x) ds` with
    /// `φ = ∂_v H`. When the geometry is metrizable, `φ` depends on `u`
    /// alone and this is the metrizing exponent; when it is not, `ψ` honestly
    /// picks up transverse dependence, and the verification against the
    /// affine connection fails rather than being fooled.
    ///
    /// Its Taylor coefficients at `p` split by the `u`-exponent `γ_u` of the
    /// multi-index: `γ_u ≥ 1` reads the `φ` jet at `p`; `γ_u = 0` integrates
    /// the matching transverse coefficient of the `φ` jet along `u`.
    fn psi_jet(&self, p: &Point, order: usize) -> Result<Jet> {
        let n = p.dim();
        let kappa = self.kappa();
        let cfg = JetConfig::new(n, order)?;
        let transverse: Vec<Vec<u8>> = crate::jet::multi_indices(n, order)
            .into_iter()
            .filter(|idx| idx[0] == 0)
            .collect();

        let integrand = |s: f64| -> Result<Vec<f64>> {
            let mut coords = p.coords().to_vec();
            coords[0] = s;
            let h = self.kundt.h_jets(&Point::new(coords)?, order + 1)?;
            let phi = h.derivative(1)?;
            transverse
                .iter()
                .map(|idx| phi.taylor_coefficient(idx).copied())
                .collect()
        };
        let integrals =
            adaptive_simpson_vec(&integrand, self.u0, p[0], tol::QUADRATURE_ABS)?;

        let phi_at_p = self.kundt.h_jets(p, order + 1)?.derivative(1)?;
        Jet::from_taylor_fn(cfg, |idx| {
            if idx[0] == 0 {
                let pos = transverse
                    .iter()
                    .position(|t| t == idx)
                    .expect("transverse index enumerated");
                Ok(kappa * integrals[pos])
            } else {
                let mut shifted = idx.to_vec();
                shifted[0] -= 1;
                let coeff = *phi_at_p.taylor_coefficient(&shifted)?;
                Ok(kappa * coeff / idx[0] as f64)
            }
        })
    }

    /// Conformal factor `e^ψ` at `(u, transverse coords of at)`.
    pub fn factor_value(&self, u: f64, at: &Point) -> Result<f64> {
        let mut coords = at.coords().to_vec();
        coords[0] = u;
        let psi = self.psi_jet(&Point::new(coords)?, 1)?;
        Ok(psi.value().exp())
    }

    fn factor_jet(&self, p: &Point, order: usize) -> Result<Jet> {
        Ok(self.psi_jet(p, order)?.exp())
    }
}

impl MetricEval for MetrizedMetric {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn coordinates(&self) -> &[String] {
        self.base.coordinates()
    }

    fn component_jets(&self, p: &Point, order: usize) -> Result<SquareMatrix<Jet>> {
        let base = self.base.component_jets(p, order)?;
        let factor = self.factor_jet(p, order)?;
        Ok(base.map(|j| j.clone() * factor.clone()))
    }
}

/// Builds the metrizing metric for a geometry whose verdict is metrizable.
pub fn metrize(
    kundt: &KundtForm,
    m: f64,
    report: &MetrizabilityReport,
    u0: f64,
) -> Result<MetrizedMetric> {
    if report.verdict != Verdict::Metrizable {
        return Err(Error::Precondition(format!(
            "cannot metrize: verdict is {} (∂_v²H residual {:.3e}, ∂_v∂_aH residual {:.3e}, \
             skew Ricci {:.3e})",
            report.verdict.as_str(),
            report.s1,
            report.s2,
            report.ricci_skew_max
        )));
    }
    if m == 1.0 {
        return Err(Error::Config("m = 1 is excluded".into()));
    }
    Ok(MetrizedMetric {
        base: kundt.metric_field()?,
        kundt: kundt.clone(),
        m,
        u0,
        exponent_scale: 1.0,
    })
}

/// Max deviation between the Levi-Civita connection of `am` and the affine
/// connection of the geometry, over the sample points. Returns
/// `(deviation, gamma_scale)`.
pub fn verify_metrization(
    am: &impl MetricEval,
    kundt: &KundtForm,
    m: f64,
    points: &[Point],
) -> Result<(f64, f64)> {
    let mut deviation = 0.0f64;
    let mut scale = 0.0f64;
    for p in points {
        let tilde = crate::geometry::christoffel(am, p)?;
        let affine = affine_connection_kundt(kundt, m, p)?;
        deviation = deviation.max(tilde.max_abs_diff(&affine));
        scale = scale.max(affine.max_abs());
    }
    Ok((deviation, scale))
}

/// Geodesic spray `G^k = Γ^k_ij y^i y^j` of an affine connection.
pub fn spray_from_connection(gamma: &Tensor3<f64>, y: &[f64]) -> Vec<f64> {
    let n = gamma.n();
    (0..n)
        .map(|k| {
            let mut g = 0.0;
            for i in 0..n {
                for j in 0..n {
                    g += gamma[(k, i, j)] * y[i] * y[j];
                }
            }
            g
        })
        .collect()
}

/// Closed-form m-Kropina geodesic spray at `(x, y)`, from the decomposition
/// `∇_i b_j = A_ij + S_ij` into skew and symmetric parts:
///
/// ```text
/// G^k = αΓ^k_ij y^i y^j
///     + 2m/(m+1) · [ α²/β · y^i A^k_i
///                    − α² b^k (β(m+1) S_yy − 2mα² A_by) / (2βD)
///                    + y^k (β(m+1) S_yy − 2mα² A_by) / D ]
/// with D = (m−1)β² − m b² α²,  S_yy = S_ij y^i y^j,  A_by = b^i y^j A_ij.
/// ```
///
/// It must agree with `N^k_j y^j` from the generic pipeline wherever both are
/// defined; the acceptance suite enforces this on Berwald and non-Berwald
/// inputs alike.
pub fn spray_generic(space: &MKropinaSpace, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let n = space.n;
    let m = space.m;
    if m == -1.0 {
        return Err(Error::Config(
            "m = -1 degenerates the m-Kropina spray (F = β)".into(),
        ));
    }
    let p = Point::new(x.to_vec())?;
    let a = metric_at(&space.metric, &p)?;
    let a_inv = inverse_metric(&a)?;
    let b: Vec<f64> = space
        .oneform
        .component_jets(&p, 1)?
        .iter()
        .map(|j| j.value())
        .collect();
    let nabla = covariant_derivative_oneform(&space.metric, &space.oneform, &p)?;
    let lc = {
        let jets = metric_jets(&space.metric, &p, 1)?;
        christoffel_from_metric_jets(&jets, &p)?.map(|j| j.value())
    };

    let alpha2: f64 = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)] * y[i] * y[j]).sum::<f64>())
        .sum();
    let beta: f64 = b.iter().zip(y).map(|(bi, yi)| bi * yi).sum();
    let b_up: Vec<f64> = (0..n)
        .map(|k| (0..n).map(|l| a_inv[(k, l)] * b[l]).sum())
        .collect();
    let b2: f64 = b_up.iter().zip(&b).map(|(up, dn)| up * dn).sum();

    let denom = (m - 1.0) * beta * beta - m * b2 * alpha2;
    let scale = beta * beta + b2.abs() * alpha2.abs() + 1e-300;
    if beta.abs() <= 1e-12 || denom.abs() <= 1e-12 * scale {
        return Err(Error::OutsideDomain(format!(
            "spray denominator vanishes: β = {beta:.3e}, (m−1)β² − m b² α² = {denom:.3e}"
        )));
    }

    // Skew and symmetric parts of ∇b.
    let mut skew = DMatrix::zeros(n, n);
    let mut sym = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            skew[(i, j)] = 0.5 * (nabla[(i, j)] - nabla[(j, i)]);
            sym[(i, j)] = 0.5 * (nabla[(i, j)] + nabla[(j, i)]);
        }
    }
    let s_yy: f64 = (0..n)
        .map(|i| (0..n).map(|j| sym[(i, j)] * y[i] * y[j]).sum::<f64>())
        .sum();
    let a_by: f64 = (0..n)
        .map(|i| (0..n).map(|j| b_up[i] * y[j] * skew[(i, j)]).sum::<f64>())
        .sum();
    // A^k_i = a^{kl} A_li
    let a_up = |k: usize, i: usize| -> f64 {
        (0..n).map(|l| a_inv[(k, l)] * skew[(l, i)]).sum()
    };

    let common = beta * (m + 1.0) * s_yy - 2.0 * m * alpha2 * a_by;
    let mut spray = Vec::with_capacity(n);
    for k in 0..n {
        let mut g = 0.0;
        for i in 0..n {
            for j in 0..n {
                g += lc[(k, i, j)] * y[i] * y[j];
            }
        }
        let mut ya: f64 = 0.0;
        for i in 0..n {
            ya += y[i] * a_up(k, i);
        }
        let correction = alpha2 / beta * ya - alpha2 * b_up[k] * common / (2.0 * beta * denom)
            + y[k] * common / denom;
        g += 2.0 * m / (m + 1.0) * correction;
        spray.push(g);
    }
    Ok(spray)
}

/// For `m = 1` with `b² ≠ 0`, the Berwald property forces the symmetric part
/// of `∇b` to be conformal to the metric: fits `S_ij = q a_ij` pointwise.
#[derive(Debug, Clone)]
pub struct M1Check {
    pub berwald_possible: bool,
    pub q: f64,
    pub residual: f64,
    pub tolerance: f64,
}

pub fn check_m1_nonnull(space: &MKropinaSpace, p: &Point) -> Result<M1Check> {
    if space.m != 1.0 {
        return Err(Error::Config(format!(
            "this check applies to m = 1 only, got m = {}",
            space.m
        )));
    }
    let n = space.n;
    let a = metric_at(&space.metric, p)?;
    let a_inv = inverse_metric(&a)?;
    let b: Vec<f64> = space
        .oneform
        .component_jets(p, 1)?
        .iter()
        .map(|j| j.value())
        .collect();
    let mut b2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            b2 += a_inv[(i, j)] * b[i] * b[j];
        }
    }
    if b2.abs() <= tol::VALIDITY {
        return Err(Error::Precondition(format!(
            "b² = {b2:.3e} at the sample point: a null 1-form with m = 1 does not \
             define a Finsler space"
        )));
    }
    let nabla = covariant_derivative_oneform(&space.metric, &space.oneform, p)?;
    let sym = (nabla.clone() + nabla.transpose()).scale(0.5);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        for j in 0..n {
            num += sym[(i, j)] * a[(i, j)];
            den += a[(i, j)] * a[(i, j)];
        }
    }
    let q = num / den;
    let residual = (&sym - a.scale(q)).amax();
    let tolerance = tol::scaled(tol::STRUCTURAL, sym.amax());
    Ok(M1Check {
        berwald_possible: residual <= tolerance,
        q,
        residual,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finsler::{
        berwald_detect, fundamental_tensor, nonlinear_connection, sample_directions,
    };
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(coords: &[f64]) -> Point {
        Point::new(coords.to_vec()).unwrap()
    }

    fn random_points(seed: u64, count: usize, dim: usize) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| pt(&(0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>()))
            .collect()
    }

    /// H = u·v, W = 0, h = identity: the metrizable example geometry.
    fn uv_wave_kundt() -> KundtForm {
        KundtForm::from_strings(
            &["u", "v", "x", "y"],
            "u*v",
            &["0", "0"],
            &[&["1", "0"], &["0", "1"]],
        )
        .unwrap()
    }

    fn flat_null_kundt() -> KundtForm {
        KundtForm::from_strings(
            &["u", "v", "x", "y"],
            "0",
            &["0", "0"],
            &[&["1", "0"], &["0", "1"]],
        )
        .unwrap()
    }

    #[test]
    fn kundt_rejects_v_dependence_in_transverse_data() {
        let r = KundtForm::from_strings(
            &["u", "v", "x", "y"],
            "0",
            &["v", "0"],
            &[&["1", "0"], &["0", "1"]],
        );
        match r {
            Err(Error::Config(msg)) => assert!(msg.contains("must not depend")),
            other => panic!("expected rejection, got {other:?}"),
        }
        let r = KundtForm::from_strings(
            &["u", "v", "x", "y"],
            "0",
            &["0", "0"],
            &[&["1 + v^2", "0"], &["0", "1"]],
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn kundt_metric_has_expected_components() {
        let k = KundtForm::from_strings(
            &["u", "v", "x", "y"],
            "u*v",
            &["2*u", "0"],
            &[&["1", "0"], &["0", "1"]],
        )
        .unwrap();
        let g = k.metric_field().unwrap();
        let m = metric_at(&g, &pt(&[0.7, 1.3, 0.0, 0.0])).unwrap();
        assert!((m[(0, 0)] - 0.91).abs() < 1e-15);
        assert_eq!(m[(0, 1)], -1.0);
        // symmetrized product: a_ux = W_1 / 2 = u
        assert!((m[(0, 2)] - 0.7).abs() < 1e-15);
        assert_eq!(m[(1, 1)], 0.0);
    }

    #[test]
    fn m1_with_null_oneform_rejected_at_construction() {
        let k = flat_null_kundt();
        match k.space(1.0) {
            Err(Error::Config(msg)) => assert!(msg.contains("does not define a Finsler space")),
            other => panic!("expected construction rejection, got {other:?}"),
        }
        // Also through the general constructor with probe points.
        let g = k.metric_field().unwrap();
        let b = k.oneform().unwrap();
        let r = MKropinaSpace::new(g, b, 1.0, &random_points(1, 8, 4));
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn validate_closed_null_for_du() {
        let space = uv_wave_kundt().space(0.5).unwrap();
        let v = validate(&space, &random_points(2, 25, 4)).unwrap();
        assert!(v.closed && v.null);
        assert!(v.closed_residual < 1e-14);
        assert!(v.null_residual < 1e-14);
    }

    #[test]
    fn validate_rejects_small_samples() {
        let space = uv_wave_kundt().space(0.5).unwrap();
        assert!(matches!(
            validate(&space, &random_points(2, 5, 4)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn validate_non_closed_oneform() {
        // b = x³ du has db = dx³ ∧ du ≠ 0.
        let g = uv_wave_kundt().metric_field().unwrap();
        let b = OneFormField::from_strings(&["u", "v", "x", "y"], &["x", "0", "0", "0"]).unwrap();
        let space = MKropinaSpace::new(g, b, 0.5, &[]).unwrap();
        let v = validate(&space, &random_points(3, 25, 4)).unwrap();
        assert!(!v.closed);
        assert!(v.closed_residual > 0.5);
    }

    #[test]
    fn validate_dv_is_closed_but_not_null_on_uv_wave() {
        // b = dv: closed; b² = a^{vv} = −uv, nonzero away from the axes.
        let g = uv_wave_kundt().metric_field().unwrap();
        let b = OneFormField::from_strings(&["u", "v", "x", "y"], &["0", "1", "0", "0"]).unwrap();
        let space = MKropinaSpace::new(g.clone(), b, 0.5, &[]).unwrap();
        let v = validate(&space, &random_points(4, 25, 4)).unwrap();
        assert!(v.closed);
        assert!(!v.null);
        // a^{vv} = −uv at a specific point, via the inverse-metric oracle.
        let p = pt(&[0.7, 1.3, 0.0, 0.0]);
        let inv = inverse_metric(&metric_at(&g, &p).unwrap()).unwrap();
        assert!((inv[(1, 1)] + 0.91).abs() < 1e-12);
    }

    #[test]
    fn closed_condition_matches_dv_h_formula() {
        // c = −∂_v H / (2(1−m)) at 50 random points.
        let kundt = KundtForm::from_strings(
            &["u", "v", "x", "y"],
            "u*v + 0.3*v*u^2 + 0.2*x^2",
            &["0.1*u", "0"],
            &[&["1", "0"], &["0", "1"]],
        )
        .unwrap();
        for m in [0.5, -0.5, 2.0] {
            let space = kundt.space(m).unwrap();
            for p in random_points(5, 50, 4) {
                let cb = berwald_condition_closed(&space, &p).unwrap();
                assert!(cb.holds, "residual {}", cb.residual);
                let dvh = kundt.h_jets(&p, 1).unwrap().partial(&[1]).unwrap();
                let expect = -dvh / (2.0 * (1.0 - m));
                assert!(
                    (cb.c - expect).abs() <= 1e-9 * (1.0 + expect.abs()),
                    "c = {} vs {expect}",
                    cb.c
                );
            }
        }
    }

    #[test]
    fn parallel_oneform_gives_c_zero() {
        let space = flat_null_kundt().space(0.5).unwrap();
        let p = pt(&[0.3, -0.4, 0.2, 0.9]);
        let cb = berwald_condition_closed(&space, &p).unwrap();
        assert!(cb.holds);
        assert!(cb.c.abs() < 1e-12);
        let cert = berwald_condition_general(&space, &p).unwrap();
        assert_eq!(cert.kind, CertificateKind::Parallel);
    }

    #[test]
    fn v_dependent_transverse_term_breaks_berwald() {
        // W_1 = v·x makes ∇b pick up off-(u,u) components.
        let g = MetricField::from_strings(
            &["u", "v", "x", "y"],
            &[
                &["u*v", "-1", "0.5*v*x", "0"],
                &["-1", "0", "0", "0"],
                &["0.5*v*x", "0", "1", "0"],
                &["0", "0", "0", "1"],
            ],
        )
        .unwrap();
        let b = OneFormField::from_strings(&["u", "v", "x", "y"], &["1", "0", "0", "0"]).unwrap();
        let space = MKropinaSpace::new(g, b, 0.5, &[]).unwrap();
        let p = pt(&[0.4, 0.8, 0.6, -0.2]);
        let cb = berwald_condition_closed(&space, &p).unwrap();
        assert!(!cb.holds);
        assert!(cb.residual > 1e-3);
        let cert = berwald_condition_general(&space, &p).unwrap();
        assert_eq!(cert.kind, CertificateKind::NotBerwald);
        assert!(cert.residual > 1e-3);
        assert!(matches!(
            affine_connection_space(&space, &p),
            Err(Error::NotBerwald { .. })
        ));
    }

    #[test]
    fn general_certificate_consistent_with_closed_solver() {
        let kundt = uv_wave_kundt();
        let space = kundt.space(0.5).unwrap();
        for p in random_points(6, 20, 4) {
            let cb = berwald_condition_closed(&space, &p).unwrap();
            let cert = berwald_condition_general(&space, &p).unwrap();
            assert!(cert.residual <= cert.tolerance);
            match cert.kind {
                CertificateKind::ClosedNullWithC => {
                    let c = cert.c.unwrap();
                    assert!((c - cb.c).abs() <= 1e-9 * (1.0 + cb.c.abs()));
                    // f ∝ b with f = c·b
                    let f = cert.f.unwrap();
                    assert!((f[0] - c).abs() <= 1e-9 * (1.0 + c.abs()));
                    for fi in &f[1..] {
                        assert!(fi.abs() <= 1e-9 * (1.0 + c.abs()));
                    }
                }
                // u near 0 makes ∇b ≈ 0, which classifies as parallel.
                CertificateKind::Parallel => assert!(cb.c.abs() < 1e-6),
                other => panic!("unexpected kind {other:?} at {:?}", p.coords()),
            }
        }
    }

    #[test]
    fn affine_connection_closed_forms_on_uv_wave() {
        let kundt = uv_wave_kundt();
        for m in [0.5, 0.3, -0.5, 2.0] {
            let space = kundt.space(m).unwrap();
            for p in random_points(7, 25, 4) {
                let (u, v) = (p[0], p[1]);
                let gamma = affine_connection_kundt(&kundt, m, &p).unwrap();
                let k = m / (2.0 * (1.0 - m));
                // Expected non-vanishing coefficients.
                let mut expect = Tensor3::fill(4, 0.0);
                expect[(0, 0, 0)] = (1.0 + m) * u / (2.0 * (1.0 - m));
                expect[(1, 0, 0)] = -(1.0 - m - u * u) * v / (2.0 * (1.0 - m));
                expect[(1, 0, 1)] = -u / 2.0;
                expect[(1, 1, 0)] = -u / 2.0;
                expect[(1, 2, 2)] = k * u;
                expect[(1, 3, 3)] = k * u;
                expect[(2, 0, 2)] = k * u;
                expect[(2, 2, 0)] = k * u;
                expect[(3, 0, 3)] = k * u;
                expect[(3, 3, 0)] = k * u;
                assert!(
                    gamma.max_abs_diff(&expect) < 1e-12,
                    "m = {m}: dev {}",
                    gamma.max_abs_diff(&expect)
                );
                // The certificate-driven general route agrees.
                let from_space = affine_connection_space(&space, &p).unwrap();
                assert!(gamma.max_abs_diff(&from_space) < 1e-9);
                // And the jet route for the closed-null scalar agrees.
                let from_jets =
                    affine_connection_closed_null_jets(&space, &p, 0)
                        .unwrap()
                        .map(|j| j.value());
                assert!(gamma.max_abs_diff(&from_jets) < 1e-9);
            }
        }
    }

    #[test]
    fn affine_connection_value_at_worked_point() {
        let kundt = uv_wave_kundt();
        let p = pt(&[0.7, 1.3, 0.0, 0.0]);
        let gamma = affine_connection_kundt(&kundt, 0.5, &p).unwrap();
        assert!((gamma[(0, 0, 0)] - 1.05).abs() < 1e-13);
        assert!((gamma[(1, 0, 1)] + 0.35).abs() < 1e-13);
        assert!((gamma[(2, 0, 2)] - 0.35).abs() < 1e-13);
        assert!((gamma[(1, 0, 0)] + 0.013).abs() < 1e-13);
    }

    #[test]
    fn zero_phi_reduces_to_levi_civita() {
        // H independent of v: ΔΓ = 0, so Γ = αΓ.
        let kundt = KundtForm::from_strings(
            &["u", "v", "x", "y"],
            "0.4*u^2 + 0.3*x^2",
            &["0.2*u", "0"],
            &[&["1", "0"], &["0", "1"]],
        )
        .unwrap();
        let metric = kundt.metric_field().unwrap();
        let p = pt(&[0.5, -0.3, 0.8, 0.1]);
        let gamma = affine_connection_kundt(&kundt, 0.5, &p).unwrap();
        let lc = crate::geometry::christoffel(&metric, &p).unwrap();
        assert!(gamma.max_abs_diff(&lc) < 1e-13);
    }

    #[test]
    fn numeric_berwald_gamma_matches_closed_form() {
        let kundt = uv_wave_kundt();
        let m = 0.5;
        let space = kundt.space(m).unwrap();
        let f = space.finsler();
        let x = [0.7, 1.3, 0.0, 0.0];
        let dirs = sample_directions(&f, &x, 7, 99).unwrap();
        let det = berwald_detect(&f, &x, &dirs, 1e-8).unwrap();
        assert!(det.is_berwald, "residual {}", det.residual);
        let gamma_numeric = det.gamma.unwrap();
        let gamma_closed = affine_connection_kundt(&kundt, m, &pt(&x)).unwrap();
        assert!(
            gamma_numeric.max_abs_diff(&gamma_closed) < 1e-8,
            "dev {}",
            gamma_numeric.max_abs_diff(&gamma_closed)
        );
    }

    #[test]
    fn finsler_function_is_one_homogeneous_on_a_conic_domain() {
        let space = uv_wave_kundt().space(0.5).unwrap();
        let f = space.finsler();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut checked = 0;
        while checked < 20 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if !f.in_domain(&x, &y) {
                continue;
            }
            checked += 1;
            let fv = f.f(&x, &y).unwrap();
            for lambda in [0.5, 2.0, 7.3] {
                let ys: Vec<f64> = y.iter().map(|v| v * lambda).collect();
                assert!(f.in_domain(&x, &ys), "domain is not conic at λ = {lambda}");
                let fl = f.f(&x, &ys).unwrap();
                assert!(
                    (fl - lambda * fv).abs() <= 1e-10 * (1.0 + lambda * fv),
                    "F(x, {lambda}y) = {fl} vs {}",
                    lambda * fv
                );
            }
        }
    }

    #[test]
    fn numeric_detector_flags_v_dependent_transverse_term() {
        // W_1 = v on the flat wave: the connection is genuinely non-linear
        // in y and sampling-based detection must say so.
        let g = MetricField::from_strings(
            &["u", "v", "x", "y"],
            &[
                &["0", "-1", "0.5*v", "0"],
                &["-1", "0", "0", "0"],
                &["0.5*v", "0", "1", "0"],
                &["0", "0", "0", "1"],
            ],
        )
        .unwrap();
        let b = OneFormField::from_strings(&["u", "v", "x", "y"], &["1", "0", "0", "0"]).unwrap();
        let space = MKropinaSpace::new(g, b, 0.5, &[]).unwrap();
        let f = space.finsler();
        let x = [0.3, 0.6, 0.2, -0.1];
        let dirs = sample_directions(&f, &x, 7, 7).unwrap();
        let det = berwald_detect(&f, &x, &dirs, 1e-8).unwrap();
        assert!(!det.is_berwald);
        assert!(det.residual > 1e-3, "residual {}", det.residual);
        assert!(det.gamma.is_none());
    }

    #[test]
    fn finsler_curvature_matches_affine_curvature_for_berwald() {
        // For a Berwald space the nonlinear-connection curvature is the
        // contraction of the affine curvature, and the Finsler Ricci tensor
        // is the symmetrization of the affine Ricci tensor.
        use crate::finsler::finsler_curvature;
        let kundt = KundtForm::from_strings(
            &["u", "v", "x", "y"],
            "x*v + 0.3*u*v",
            &["0.2*u", "0"],
            &[&["1", "0"], &["0", "1"]],
        )
        .unwrap();
        let m = 0.5;
        let space = kundt.space(m).unwrap();
        let f = space.finsler();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let mut checked = 0;
        while checked < 8 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if !f.in_domain(&x, &y) {
                continue;
            }
            checked += 1;
            let curv = finsler_curvature(&f, &x, &y).unwrap();
            let affine = affine_curvature_kundt(&kundt, m, &Point::new(x.clone()).unwrap())
                .unwrap();
            // R^j_kl = R̄_i{}^j{}_kl y^i
            for j in 0..4 {
                for k in 0..4 {
                    for l in 0..4 {
                        let mut expect = 0.0;
                        for i in 0..4 {
                            expect += affine.riemann[(i, j, k, l)] * y[i];
                        }
                        assert!(
                            (curv.r[(j, k, l)] - expect).abs()
                                <= 1e-7 * (1.0 + expect.abs()),
                            "R^{j}_{k}{l} = {} vs {expect}",
                            curv.r[(j, k, l)]
                        );
                    }
                }
            }
            // Ric = R̄_ij y^i y^j and R_ij = ½(R̄_ij + R̄_ji)
            let mut ric_expect = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    ric_expect += affine.ricci[(i, j)] * y[i] * y[j];
                }
            }
            assert!((curv.ric - ric_expect).abs() <= 1e-7 * (1.0 + ric_expect.abs()));
            for i in 0..4 {
                for j in 0..4 {
                    let sym = 0.5 * (affine.ricci[(i, j)] + affine.ricci[(j, i)]);
                    assert!(
                        (curv.ric_tensor[(i, j)] - sym).abs() <= 1e-7 * (1.0 + sym.abs()),
                        "R_{i}{j} = {} vs {sym}",
                        curv.ric_tensor[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn nonlinear_connection_contraction_equals_affine_spray() {
        let kundt = uv_wave_kundt();
        let m = 0.5;
        let space = kundt.space(m).unwrap();
        let f = space.finsler();
        let x = [0.7, 1.3, 0.0, 0.0];
        let y = [1.0, -0.2, 0.3, 0.5];
        assert!(f.in_domain(&x, &y));
        let conn = nonlinear_connection(&f, &x, &y).unwrap();
        let gamma = affine_connection_kundt(&kundt, m, &pt(&x)).unwrap();
        let spray = spray_from_connection(&gamma, &y);
        for i in 0..4 {
            let mut ny = 0.0;
            for j in 0..4 {
                ny += conn.n[(i, j)] * y[j];
            }
            assert!((ny - spray[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn delta_gamma_trace_identity() {
        // ΔΓ^k_kj = (m n/(2(1−m))) ∂_v H δ^u_j.
        let kundt = KundtForm::from_strings(
            &["u", "v", "x", "y"],
            "u*v + 0.2*v*x^2",
            &["0.3*x", "0.1*u"],
            &[&["1 + 0.1*u^2", "0"], &["0", "1"]],
        )
        .unwrap();
        let m = 0.3;
        let metric = kundt.metric_field().unwrap();
        for p in random_points(8, 20, 4) {
            let full = affine_connection_kundt(&kundt, m, &p).unwrap();
            let lc = crate::geometry::christoffel(&metric, &p).unwrap();
            let dvh = kundt.h_jets(&p, 1).unwrap().partial(&[1]).unwrap();
            for j in 0..4 {
                let mut trace = 0.0;
                for k in 0..4 {
                    trace += full[(k, k, j)] - lc[(k, k, j)];
                }
                let expect = if j == 0 {
                    m * 4.0 / (2.0 * (1.0 - m)) * dvh
                } else {
                    0.0
                };
                assert!(
                    (trace - expect).abs() < 1e-10,
                    "trace {trace} vs {expect} at j = {j}"
                );
            }
        }
    }

    #[test]
    fn skew_ricci_closed_form_matches_brute_force() {
        let geometries = [
            ("u*v", true),
            ("v*x", false),
            ("v^2", false),
            ("0.5*u^2*v + 0.3*x*y", true),
            ("v^3 + u*v", false),
        ];
        let m = 0.5;
        for (h, metrizable) in geometries {
            let kundt = KundtForm::from_strings(
                &["u", "v", "x", "y"],
                h,
                &["0.2*u", "0"],
                &[&["1", "0"], &["0", "1"]],
            )
            .unwrap();
            let mut skew_max = 0.0f64;
            for p in random_points(9, 15, 4) {
                let curv = affine_curvature_kundt(&kundt, m, &p).unwrap();
                assert!(
                    curv.agreement.unwrap() < 1e-8,
                    "H = {h}: skew routes disagree by {}",
                    curv.agreement.unwrap()
                );
                skew_max = skew_max.max(curv.skew_max);
            }
            if metrizable {
                assert!(skew_max < 1e-9, "H = {h}: skew {skew_max}");
            } else {
                assert!(skew_max > 1e-3, "H = {h}: skew {skew_max}");
            }
        }
    }

    #[test]
    fn worked_skew_value_for_linear_transverse_coefficient() {
        // H = v·x, m = 0.5, n = 4: the (u, x) skew component is −1, by both
        // the closed form and the brute-force contraction.
        let kundt = KundtForm::from_strings(
            &["u", "v", "x", "y"],
            "v*x",
            &["0", "0"],
            &[&["1", "0"], &["0", "1"]],
        )
        .unwrap();
        let p = pt(&[0.3, -0.6, 0.2, 0.7]);
        let curv = affine_curvature_kundt(&kundt, 0.5, &p).unwrap();
        let closed = curv.closed_form_skew.unwrap();
        assert!((closed[(0, 2)] + 1.0).abs() < 1e-12);
        assert!((curv.skew[(0, 2)] + 1.0).abs() < 1e-8);
        assert!((curv.skew[(2, 0)] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn brute_force_skew_via_space_route_matches_kundt_route() {
        let kundt = KundtForm::from_strings(
            &["u", "v", "x", "y"],
            "u*v + 0.4*v*x",
            &["0.1*x", "0"],
            &[&["1", "0"], &["0", "1"]],
        )
        .unwrap();
        let m = 0.3;
        let space = kundt.space(m).unwrap();
        for p in random_points(10, 10, 4) {
            let a = affine_curvature_kundt(&kundt, m, &p).unwrap();
            let b = affine_curvature_space(&space, &p).unwrap();
            assert!(((&a.ricci - &b.ricci).amax()) < 1e-8);
        }
    }

    #[test]
    fn metrizability_verdicts() {
        let m = 0.5;
        let grid = random_points(11, 30, 4);
        let cases = [
            ("u*v", Verdict::Metrizable, 0.0, 0.0),
            ("v*x", Verdict::NotMetrizable, 0.0, 1.0),
            ("v^2", Verdict::NotMetrizable, 2.0, 0.0),
        ];
        for (h, verdict, s1, s2) in cases {
            let kundt = KundtForm::from_strings(
                &["u", "v", "x", "y"],
                h,
                &["0", "0"],
                &[&["1", "0"], &["0", "1"]],
            )
            .unwrap();
            let rep = metrizability_verdict(&kundt, m, &grid).unwrap();
            assert_eq!(rep.verdict, verdict, "H = {h}");
            assert!((rep.s1 - s1).abs() < 1e-12, "H = {h}: s1 = {}", rep.s1);
            assert!((rep.s2 - s2).abs() < 1e-12, "H = {h}: s2 = {}", rep.s2);
            if verdict == Verdict::Metrizable {
                // φ(u) = u for H = u·v.
                for (u, phi) in &rep.phi_samples {
                    assert!((phi - u).abs() < 1e-12);
                }
            } else {
                assert!(rep.phi_samples.is_empty());
            }
        }
    }

    #[test]
    fn empty_grid_rejected() {
        let kundt = uv_wave_kundt();
        assert!(matches!(
            metrizability_verdict(&kundt, 0.5, &[]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn metrize_conformal_factor_values() {
        // φ = u: factor = exp(m u²/(2(1−m))); φ = 0: factor ≡ 1;
        // φ = 1, m = ½, u0 = 0, u = 2: factor = e².
        let grid = random_points(12, 25, 4);
        let at = pt(&[0.0, 0.0, 0.0, 0.0]);

        let kundt = uv_wave_kundt();
        for m in [0.5, 0.3, -0.5, 2.0] {
            let rep = metrizability_verdict(&kundt, m, &grid).unwrap();
            let tilde = metrize(&kundt, m, &rep, 0.0).unwrap();
            for u in [-1.0, -0.3, 0.0, 0.5, 1.2] {
                let expect = (m * u * u / (2.0 * (1.0 - m))).exp();
                let got = tilde.factor_value(u, &at).unwrap();
                assert!(
                    (got - expect).abs() <= 1e-10 * (1.0 + expect),
                    "m = {m}, u = {u}: {got} vs {expect}"
                );
            }
        }

        let flat = flat_null_kundt();
        let rep = metrizability_verdict(&flat, 0.5, &grid).unwrap();
        let tilde = metrize(&flat, 0.5, &rep, 0.0).unwrap();
        for u in [-0.7, 0.4, 1.0] {
            assert!((tilde.factor_value(u, &at).unwrap() - 1.0).abs() < 1e-14);
        }

        let phi_one = KundtForm::from_strings(
            &["u", "v", "x", "y"],
            "v",
            &["0", "0"],
            &[&["1", "0"], &["0", "1"]],
        )
        .unwrap();
        let rep = metrizability_verdict(&phi_one, 0.5, &grid).unwrap();
        let tilde = metrize(&phi_one, 0.5, &rep, 0.0).unwrap();
        let got = tilde.factor_value(2.0, &at).unwrap();
        assert!(
            (got - 2.0f64.exp()).abs() < 1e-10 * 2.0f64.exp(),
            "{got} vs e²"
        );
    }

    #[test]
    fn metrize_requires_metrizable_verdict() {
        let kundt = KundtForm::from_strings(
            &["u", "v", "x", "y"],
            "v^2",
            &["0", "0"],
            &[&["1", "0"], &["0", "1"]],
        )
        .unwrap();
        let rep = metrizability_verdict(&kundt, 0.5, &random_points(13, 25, 4)).unwrap();
        assert!(matches!(
            metrize(&kundt, 0.5, &rep, 0.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn verify_metrization_on_uv_wave() {
        let kundt = uv_wave_kundt();
        let m = 0.5;
        let grid = random_points(14, 25, 4);
        let rep = metrizability_verdict(&kundt, m, &grid).unwrap();
        let tilde = metrize(&kundt, m, &rep, 0.0).unwrap();
        let points = random_points(15, 100, 4);
        let (dev, scale) = verify_metrization(&tilde, &kundt, m, &points).unwrap();
        assert!(
            dev <= tol::scaled(tol::CROSS_MODULE, scale),
            "deviation {dev}"
        );

        // Identical metric when φ = 0: deviation is exactly zero.
        let flat = flat_null_kundt();
        let rep0 = metrizability_verdict(&flat, m, &grid).unwrap();
        let tilde0 = metrize(&flat, m, &rep0, 0.0).unwrap();
        let (dev0, _) = verify_metrization(&tilde0, &flat, m, &points[..10]).unwrap();
        assert!(dev0 < 1e-14);

        // Negative control: doubled conformal exponent breaks it.
        let wrong = metrize(&kundt, m, &rep, 0.0).unwrap().with_exponent_scale(2.0);
        let (dev_wrong, _) = verify_metrization(&wrong, &kundt, m, &points[..20]).unwrap();
        assert!(dev_wrong > 1e-3, "wrong-factor deviation {dev_wrong}");
    }

    #[test]
    fn spray_matches_pipeline_contraction() {
        // Closed-form spray vs N·y from the generic pipeline, on a Berwald,
        // a non-Berwald, and a non-closed fixture.
        let fixtures: Vec<(MetricField, OneFormField, f64)> = vec![
            (
                uv_wave_kundt().metric_field().unwrap(),
                uv_wave_kundt().oneform().unwrap(),
                0.5,
            ),
            (
                MetricField::from_strings(
                    &["u", "v", "x", "y"],
                    &[
                        &["u*v", "-1", "0.5*v", "0"],
                        &["-1", "0", "0", "0"],
                        &["0.5*v", "0", "1", "0"],
                        &["0", "0", "0", "1"],
                    ],
                )
                .unwrap(),
                OneFormField::from_strings(&["u", "v", "x", "y"], &["1", "0", "0", "0"])
                    .unwrap(),
                0.3,
            ),
            (
                flat_null_kundt().metric_field().unwrap(),
                OneFormField::from_strings(
                    &["u", "v", "x", "y"],
                    &["1 + 0.3*x", "0", "0", "0"],
                )
                .unwrap(),
                -0.5,
            ),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for (metric, oneform, m) in fixtures {
            let space = MKropinaSpace::new(metric, oneform, m, &[]).unwrap();
            let f = space.finsler();
            let mut checked = 0;
            while checked < 15 {
                let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let y: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                if !f.in_domain(&x, &y) {
                    continue;
                }
                checked += 1;
                let conn = nonlinear_connection(&f, &x, &y).unwrap();
                let spray = spray_generic(&space, &x, &y).unwrap();
                let mut scale = 1.0f64;
                for i in 0..4 {
                    let mut ny = 0.0;
                    for j in 0..4 {
                        ny += conn.n[(i, j)] * y[j];
                    }
                    scale = scale.max(ny.abs());
                    assert!(
                        (ny - spray[i]).abs() <= tol::SPRAY * scale,
                        "m = {m}: spray[{i}] = {} vs N·y = {ny}",
                        spray[i]
                    );
                }
            }
        }
    }

    #[test]
    fn spray_is_two_homogeneous_and_flat_spray_vanishes() {
        let space = flat_null_kundt().space(0.5).unwrap();
        let x = [0.1, 0.2, 0.3, 0.4];
        let y = [1.0, -0.4, 0.3, 0.2];
        let g = spray_generic(&space, &x, &y).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-14));

        let kundt = uv_wave_kundt();
        let space = kundt.space(0.5).unwrap();
        let g1 = spray_generic(&space, &x, &y).unwrap();
        for lambda in [0.5, 2.0, 7.3] {
            let ys: Vec<f64> = y.iter().map(|v| v * lambda).collect();
            let gl = spray_generic(&space, &x, &ys).unwrap();
            for k in 0..4 {
                let expect = lambda * lambda * g1[k];
                assert!((gl[k] - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
            }
        }
    }

    #[test]
    fn det_ratio_closed_form_matches_fundamental_tensor() {
        let kundt = uv_wave_kundt();
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for m in [-0.5, 0.3, 0.5, 2.0] {
            let space = kundt.space(m).unwrap();
            let f = space.finsler();
            let mut checked = 0;
            while checked < 25 {
                let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let y: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                if !f.in_domain(&x, &y) {
                    continue;
                }
                checked += 1;
                let ft = fundamental_tensor(&f, &x, &y).unwrap();
                let p = pt(&x);
                let det_a = metric_at(space.metric(), &p).unwrap().determinant();
                let expect = space.det_ratio_closed_form(&x, &y).unwrap() * det_a;
                assert!(
                    (ft.det - expect).abs() <= 1e-8 * (1.0 + expect.abs()),
                    "m = {m}: det g = {} vs {expect}",
                    ft.det
                );
            }
        }
    }

    #[test]
    fn m1_degenerate_fundamental_tensor_detected() {
        // Bypassing the space constructor: m = 1 with null b must surface as
        // a degeneracy error in the generic pipeline.
        let kundt = flat_null_kundt();
        let f = MKropinaFinsler {
            metric: kundt.metric_field().unwrap(),
            oneform: kundt.oneform().unwrap(),
            m: 1.0,
        };
        let x = [0.1, 0.2, 0.3, 0.4];
        let y = [1.0, -0.3, 0.4, 0.1];
        assert!(f.in_domain(&x, &y));
        assert!(matches!(
            fundamental_tensor(&f, &x, &y),
            Err(Error::DegenerateFundamentalTensor { .. })
        ));
    }

    #[test]
    fn m1_nonnull_checks() {
        // Parallel b with b² ≠ 0: Berwald possible with q = 0.
        let g = MetricField::from_strings(
            &["t", "x", "y", "z"],
            &[
                &["-1", "0", "0", "0"],
                &["0", "1", "0", "0"],
                &["0", "0", "1", "0"],
                &["0", "0", "0", "1"],
            ],
        )
        .unwrap();
        let b = OneFormField::from_strings(&["t", "x", "y", "z"], &["1", "0", "0", "0"]).unwrap();
        let space = MKropinaSpace::new(g.clone(), b, 1.0, &random_points(19, 5, 4)).unwrap();
        let p = pt(&[0.1, 0.2, 0.3, 0.4]);
        let check = check_m1_nonnull(&space, &p).unwrap();
        assert!(check.berwald_possible);
        assert!(check.q.abs() < 1e-12);

        // Non-conformal symmetric ∇b: not Berwald-compatible.
        let b = OneFormField::from_strings(&["t", "x", "y", "z"], &["1 + 0.3*x", "0", "0", "0"])
            .unwrap();
        let space = MKropinaSpace::new(g, b, 1.0, &random_points(20, 5, 4)).unwrap();
        let check = check_m1_nonnull(&space, &p).unwrap();
        assert!(!check.berwald_possible);
        assert!(check.residual > 1e-3);

        // Null point: precondition failure.
        let g2 = flat_null_kundt().metric_field().unwrap();
        let b2 = OneFormField::from_strings(&["u", "v", "x", "y"], &["0", "0", "1", "0"]).unwrap();
        let space2 = MKropinaSpace::new(g2, b2, 1.0, &random_points(21, 5, 4)).unwrap();
        // b = dx has b² = 1 ≠ 0 here, so instead probe with b = du which is null:
        let g3 = flat_null_kundt().metric_field().unwrap();
        let b3 = OneFormField::from_strings(&["u", "v", "x", "y"], &["1", "0", "0", "0"]).unwrap();
        // Construction with m = 1 and null b is rejected, so build with m = 1
        // via non-null probe... the null case must go through check directly:
        let space3 = MKropinaSpace {
            metric: g3,
            oneform: b3,
            m: 1.0,
            n: 4,
        };
        assert!(matches!(
            check_m1_nonnull(&space3, &p),
            Err(Error::Precondition(_))
        ));
        let _ = space2;
    }

    #[test]
    fn theorem_equivalence_on_small_sample() {
        // Skew Ricci ≤ tol ⇔ ∂_v²H = ∂_v∂_aH = 0 ⇔ metrization verifies,
        // on a handful of hand-picked geometries of both kinds.
        let m = 0.5;
        let grid = random_points(22, 20, 4);
        let verify_pts = random_points(23, 30, 4);
        let geometries = [
            "u*v",
            "0.3*u^2*v + 0.1*x^2 - 0.2*u*y",
            "v*x",
            "v^2 + u*v",
            "sin(u)*v",
            "0.5*v*x*y",
        ];
        for h in geometries {
            let kundt = KundtForm::from_strings(
                &["u", "v", "x", "y"],
                h,
                &["0.1*u", "0"],
                &[&["1", "0"], &["0", "1"]],
            )
            .unwrap();
            let rep = metrizability_verdict(&kundt, m, &grid).unwrap();
            let structural = rep.verdict == Verdict::Metrizable;
            let skew_ok = rep.ricci_skew_max <= tol::scaled(tol::STRUCTURAL, rep.dv_h_max);
            let metrization_ok = match metrize(&kundt, m, &rep, 0.0) {
                Ok(tilde) => {
                    let (dev, scale) = verify_metrization(&tilde, &kundt, m, &verify_pts).unwrap();
                    dev <= tol::scaled(tol::CROSS_MODULE, scale)
                }
                Err(_) => false,
            };
            assert_eq!(structural, skew_ok, "H = {h}");
            assert_eq!(structural, metrization_ok, "H = {h}");
        }
    }
}
