//! Generic Finsler pipeline.
//!
//! Everything here works for an arbitrary Finsler function presented through
//! the [`FinslerFunction`] trait: fundamental tensor, canonical non-linear
//! connection, curvature, both Ricci objects, and numeric Berwald detection.
//! The m-Kropina closed forms of the kropina module are cross-checked against
//! this pipeline, which therefore never takes shortcuts through m-Kropina
//! structure.
//!
//! The computation seeds one jet per variable of the slit tangent bundle
//! chart (x¹..xⁿ, y¹..yⁿ) and evaluates F² once; every connection-level
//! quantity then falls out of jet algebra:
//!
//! ```text
//! g_ij  = ½ ∂̄_i ∂̄_j F²
//! N^i_j = ¼ ∂̄_j ( g^{ik} ( y^l ∂_l ∂̄_k F² − ∂_k F² ) )
//! R^i_jk = δ_j N^i_k − δ_k N^i_j,   δ_j = ∂_j − N^l_j ∂̄_l
//! Ric    = R^i_ij y^j,              R_ij = ½ ∂̄_i ∂̄_j Ric
//! ```
//!
//! The Finsler Ricci tensor needs two more y-derivatives than a single
//! order-4 jet carries, so it runs the same code over nested jets (inner
//! order 4 in all 2n variables, coefficients in an outer order-2 jet in y).

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{MetricEval, MetricField};
use crate::jet::{Jet, JetConfig};
use crate::linalg::{invert, SquareMatrix, Tensor3};
use crate::scalar::Scalar;
use crate::tol;

/// A Finsler function presented as `F²`, jet-capable in all 2n variables,
/// together with its conic domain predicate.
pub trait FinslerFunction {
    fn dim(&self) -> usize;

    /// `F²(x, y)` evaluated in an arbitrary scalar ring.
    fn f_squared<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S>;

    /// Membership in the conic subbundle where `F` is smooth with
    /// nondegenerate fundamental tensor.
    fn in_domain(&self, x: &[f64], y: &[f64]) -> bool;

    /// `F(x, y)` on the conic domain.
    fn f(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let f2 = self.f_squared(x, y)?;
        if f2 < 0.0 {
            return Err(Error::OutsideDomain(format!(
                "F² = {f2} < 0 at x = {x:?}, y = {y:?}"
            )));
        }
        Ok(f2.sqrt())
    }
}

/// `F = sqrt(a_ij(x) y^i y^j)` on the cone `a(y, y) > 0`.
#[derive(Debug, Clone)]
pub struct PseudoRiemannFinsler {
    pub metric: MetricField,
}

impl PseudoRiemannFinsler {
    pub fn new(metric: MetricField) -> Self {
        Self { metric }
    }
}

impl FinslerFunction for PseudoRiemannFinsler {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn f_squared<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        let a = self.metric.eval_components(x)?;
        let n = self.dim();
        let mut f2 = x[0].lift(0.0);
        for i in 0..n {
            for j in 0..n {
                f2 = f2 + a[(i, j)].clone() * y[i].clone() * y[j].clone();
            }
        }
        Ok(f2)
    }

    fn in_domain(&self, x: &[f64], y: &[f64]) -> bool {
        self.f_squared(x, y).map(|f2| f2 > 0.0).unwrap_or(false)
    }
}

/// `F = |y|` on R^n minus the zero section.
#[derive(Debug, Clone)]
pub struct EuclideanFinsler {
    pub dim: usize,
}

impl FinslerFunction for EuclideanFinsler {
    fn dim(&self) -> usize {
        self.dim
    }

    fn f_squared<S: Scalar>(&self, _x: &[S], y: &[S]) -> Result<S> {
        let mut f2 = y[0].lift(0.0);
        for yi in y {
            f2 = f2 + yi.clone() * yi.clone();
        }
        Ok(f2)
    }

    fn in_domain(&self, _x: &[f64], y: &[f64]) -> bool {
        y.iter().any(|&v| v != 0.0)
    }
}

/// Seeds 2n jets over (x, y) at the requested order: variable `i` is `x^i`,
/// variable `n + i` is `y^i`.
pub fn seed_phase_point<S: Scalar>(
    x: &[S],
    y: &[S],
    order: usize,
) -> Result<(Vec<Jet<S>>, Vec<Jet<S>>)> {
    let n = x.len();
    let cfg = JetConfig::new(2 * n, order)?;
    let xs: Result<Vec<_>> = x
        .iter()
        .enumerate()
        .map(|(i, v)| Jet::variable(cfg, i, v.clone()))
        .collect();
    let ys: Result<Vec<_>> = y
        .iter()
        .enumerate()
        .map(|(i, v)| Jet::variable(cfg, n + i, v.clone()))
        .collect();
    Ok((xs?, ys?))
}

/// Connection-level data at one (x, y), in an arbitrary coefficient ring:
/// jets of F² (order 4), of the fundamental tensor and its inverse (order 2),
/// and of the non-linear connection (order 1).
struct ConnectionJets<S: Scalar> {
    n: usize,
    f2: Jet<S>,
    det_g: f64,
    nconn: SquareMatrix<Jet<S>>,
}

fn connection_jets<S: Scalar, F: FinslerFunction>(
    f: &F,
    x: &[S],
    y: &[S],
) -> Result<ConnectionJets<S>> {
    let n = f.dim();
    let (xj, yj) = seed_phase_point(x, y, 4)?;
    let f2 = f.f_squared(&xj, &yj)?;

    let mut g = SquareMatrix::fill(n, f2.lift(0.0));
    for i in 0..n {
        for j in 0..=i {
            let gij = f2.derivative(n + i)?.derivative(n + j)?.scale(0.5);
            g[(i, j)] = gij.clone();
            g[(j, i)] = gij;
        }
    }
    let det_g = g.map(|j| j.value()).to_dmatrix().determinant();
    if !det_g.is_finite() || det_g.abs() <= tol::METRIC_DEGENERACY {
        return Err(Error::DegenerateFundamentalTensor { det: det_g });
    }
    let (g_inv, _) = invert(&g)?;

    // bracket_k = y^l ∂_l ∂̄_k F² − ∂_k F²; binary ops truncate to the
    // common valid order (2) on the first addition.
    let mut bracket = Vec::with_capacity(n);
    for k in 0..n {
        let mut t = f2.derivative(k)?.scale(-1.0);
        for l in 0..n {
            let dd = f2.derivative(l)?.derivative(n + k)?;
            t = t + yj[l].clone() * dd;
        }
        bracket.push(t);
    }

    let mut nconn = SquareMatrix::fill(n, f2.lift(0.0));
    for i in 0..n {
        let mut inner = bracket[0].lift(0.0);
        for k in 0..n {
            inner.add_assign_prod(&g_inv[(i, k)], &bracket[k]);
        }
        for j in 0..n {
            nconn[(i, j)] = inner.derivative(n + j)?.scale(0.25);
        }
    }

    Ok(ConnectionJets {
        n,
        f2,
        det_g,
        nconn,
    })
}

/// The fundamental tensor `g_ij = ½ ∂̄_i ∂̄_j F²` at a point of the conic
/// domain, with determinant and inverse.
#[derive(Debug, Clone)]
pub struct FundamentalTensor {
    pub g: DMatrix<f64>,
    pub det: f64,
    pub inv: DMatrix<f64>,
}

pub fn fundamental_tensor<F: FinslerFunction>(
    f: &F,
    x: &[f64],
    y: &[f64],
) -> Result<FundamentalTensor> {
    if !f.in_domain(x, y) {
        return Err(Error::OutsideDomain(format!("x = {x:?}, y = {y:?}")));
    }
    let n = f.dim();
    let (xj, yj) = seed_phase_point(x, y, 2)?;
    let f2 = f.f_squared(&xj, &yj)?;
    let g = DMatrix::from_fn(n, n, |i, j| {
        f2.partial(&[n + i, n + j]).map(|v| 0.5 * v).unwrap_or(f64::NAN)
    });
    let det = g.determinant();
    if !det.is_finite() || det.abs() <= tol::METRIC_DEGENERACY {
        return Err(Error::DegenerateFundamentalTensor { det });
    }
    let inv = g
        .clone()
        .try_inverse()
        .ok_or(Error::DegenerateFundamentalTensor { det })?;
    Ok(FundamentalTensor { g, det, inv })
}

/// Cartan non-linear connection at (x, y): values `N^i_j` plus the exact
/// derivatives `∂̄_k N^i_j` and `∂_k N^i_j`.
#[derive(Debug, Clone)]
pub struct NonlinearConnection {
    /// `N^i_j` at `[(i, j)]`.
    pub n: DMatrix<f64>,
    /// `∂̄_k N^i_j` at `[(i, j, k)]`.
    pub dy: Tensor3<f64>,
    /// `∂_k N^i_j` at `[(i, j, k)]`.
    pub dx: Tensor3<f64>,
    pub det_g: f64,
}

pub fn nonlinear_connection<F: FinslerFunction>(
    f: &F,
    x: &[f64],
    y: &[f64],
) -> Result<NonlinearConnection> {
    if !f.in_domain(x, y) {
        return Err(Error::OutsideDomain(format!("x = {x:?}, y = {y:?}")));
    }
    let jets = connection_jets::<f64, F>(f, x, y)?;
    let n = jets.n;
    let nmat = DMatrix::from_fn(n, n, |i, j| jets.nconn[(i, j)].value());
    let mut dy = Tensor3::fill(n, 0.0);
    let mut dx = Tensor3::fill(n, 0.0);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                dy[(i, j, k)] = jets.nconn[(i, j)].partial(&[n + k])?;
                dx[(i, j, k)] = jets.nconn[(i, j)].partial(&[k])?;
            }
        }
    }
    Ok(NonlinearConnection {
        n: nmat,
        dy,
        dx,
        det_g: jets.det_g,
    })
}

/// Max-abs residual of metric compatibility `δ_k F² = (∂_k − N^l_k ∂̄_l) F²`,
/// together with `|F²|` for relative scaling.
pub fn compatibility_residual<F: FinslerFunction>(
    f: &F,
    x: &[f64],
    y: &[f64],
) -> Result<(f64, f64)> {
    let jets = connection_jets::<f64, F>(f, x, y)?;
    let n = jets.n;
    let mut max = 0.0f64;
    for k in 0..n {
        let mut delta = jets.f2.partial(&[k])?;
        for l in 0..n {
            delta -= jets.nconn[(l, k)].value() * jets.f2.partial(&[n + l])?;
        }
        max = max.max(delta.abs());
    }
    Ok((max, jets.f2.value().abs()))
}

/// Result of sampling-based Berwald detection.
#[derive(Debug, Clone)]
pub struct BerwaldDetection {
    pub is_berwald: bool,
    /// Max pairwise deviation of `∂̄N` across the sampled directions.
    pub residual: f64,
    /// The scaled tolerance the residual was compared against.
    pub tolerance: f64,
    /// Mean `Γ^i_jk` over the samples at `[(i, j, k)]`, when Berwald.
    pub gamma: Option<Tensor3<f64>>,
}

/// Draws `count` pseudorandom directions inside the conic domain at `x`,
/// uniform on [-1, 1]^n with rejection; deterministic in `seed`.
pub fn sample_directions<F: FinslerFunction>(
    f: &F,
    x: &[f64],
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let n = f.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count {
        tries += 1;
        if tries > 20_000 {
            return Err(Error::Numerical(format!(
                "could not sample {count} directions inside the conic domain at x = {x:?} \
                 ({} found in {tries} draws)",
                out.len()
            )));
        }
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if !f.in_domain(x, &y) {
            continue;
        }
        if out.iter().any(|prev| parallel(prev, &y)) {
            continue;
        }
        out.push(y);
    }
    Ok(out)
}

fn parallel(a: &[f64], b: &[f64]) -> bool {
    let dot: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
    let na: f64 = a.iter().map(|p| p * p).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|q| q * q).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return true;
    }
    (dot.abs() / (na * nb) - 1.0).abs() < 1e-9
}

/// Detects whether `N^i_j(x, ·)` is linear in `y` by comparing
/// `Γ^i_jk := ∂̄_k N^i_j` across sample directions.
pub fn berwald_detect<F: FinslerFunction>(
    f: &F,
    x: &[f64],
    dirs: &[Vec<f64>],
    base_tol: f64,
) -> Result<BerwaldDetection> {
    let n = f.dim();
    if dirs.len() < n + 2 {
        return Err(Error::Precondition(format!(
            "Berwald detection needs at least {} sample directions, got {}",
            n + 2,
            dirs.len()
        )));
    }
    for (i, a) in dirs.iter().enumerate() {
        if a.len() != n {
            return Err(Error::Precondition(format!(
                "direction {i} has dimension {} instead of {n}",
                a.len()
            )));
        }
        if !f.in_domain(x, a) {
            return Err(Error::OutsideDomain(format!(
                "sample direction {a:?} at x = {x:?}"
            )));
        }
        for b in &dirs[..i] {
            if parallel(a, b) {
                return Err(Error::Precondition(format!(
                    "sample directions must be pairwise non-parallel; {a:?} ∥ {b:?}"
                )));
            }
        }
    }

    let mut gammas = Vec::with_capacity(dirs.len());
    for y in dirs {
        let conn = nonlinear_connection(f, x, y)?;
        gammas.push(conn.dy);
    }
    let mut max_gamma = 0.0f64;
    for g in &gammas {
        max_gamma = max_gamma.max(g.max_abs());
    }
    let mut residual = 0.0f64;
    for (i, a) in gammas.iter().enumerate() {
        for b in &gammas[..i] {
            residual = residual.max(a.max_abs_diff(b));
        }
    }
    let tolerance = tol::scaled(base_tol, max_gamma);
    let is_berwald = residual <= tolerance;
    let gamma = is_berwald.then(|| {
        let count = gammas.len() as f64;
        Tensor3::from_fn(n, |i, j, k| {
            gammas.iter().map(|g| g[(i, j, k)]).sum::<f64>() / count
        })
    });
    Ok(BerwaldDetection {
        is_berwald,
        residual,
        tolerance,
        gamma,
    })
}

/// Curvature data of the non-linear connection at one (x, y).
#[derive(Debug, Clone)]
pub struct FinslerCurvature {
    /// `R^i_jk = δ_j N^i_k − δ_k N^i_j` at `[(i, j, k)]`.
    pub r: Tensor3<f64>,
    /// Finsler Ricci scalar `Ric = R^i_ij y^j`.
    pub ric: f64,
    /// Finsler Ricci tensor `R_ij = ½ ∂̄_i ∂̄_j Ric`, symmetric.
    pub ric_tensor: DMatrix<f64>,
}

/// Ricci scalar in an arbitrary ring; the nested-jet entry point for the
/// Ricci tensor.
fn ricci_scalar<S: Scalar, F: FinslerFunction>(f: &F, x: &[S], y: &[S]) -> Result<S> {
    let jets = connection_jets::<S, F>(f, x, y)?;
    let n = jets.n;
    let zero = x[0].lift(0.0);

    // Values (in S) of N, ∂N, ∂̄N.
    let nval = jets.nconn.map(|j| j.value_coeff().clone());
    let mut ric = zero.clone();
    for i in 0..n {
        for j in 0..n {
            // R^i_ij = δ_i N^i_j − δ_j N^i_i (sum over i)
            let mut delta_i_nij = jets.nconn[(i, j)].partial(&[i])?;
            let mut delta_j_nii = jets.nconn[(i, i)].partial(&[j])?;
            for l in 0..n {
                delta_i_nij =
                    delta_i_nij - nval[(l, i)].clone() * jets.nconn[(i, j)].partial(&[n + l])?;
                delta_j_nii =
                    delta_j_nii - nval[(l, j)].clone() * jets.nconn[(i, i)].partial(&[n + l])?;
            }
            ric = ric + (delta_i_nij - delta_j_nii) * y[j].clone();
        }
    }
    Ok(ric)
}

pub fn finsler_curvature<F: FinslerFunction>(
    f: &F,
    x: &[f64],
    y: &[f64],
) -> Result<FinslerCurvature> {
    if !f.in_domain(x, y) {
        return Err(Error::OutsideDomain(format!("x = {x:?}, y = {y:?}")));
    }
    let n = f.dim();
    let conn = nonlinear_connection(f, x, y)?;
    let mut r = Tensor3::fill(n, 0.0);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                // δ_j N^i_k − δ_k N^i_j
                let mut v = conn.dx[(i, k, j)] - conn.dx[(i, j, k)];
                for l in 0..n {
                    v += conn.dy[(i, j, l)] * conn.n[(l, k)]
                        - conn.dy[(i, k, l)] * conn.n[(l, j)];
                }
                r[(i, j, k)] = v;
            }
        }
    }
    let mut ric = 0.0;
    for i in 0..n {
        for j in 0..n {
            ric += r[(i, i, j)] * y[j];
        }
    }

    // Ricci tensor through nested jets: outer order-2 jets in y alone.
    let outer_cfg = JetConfig::new(n, 2)?;
    let x_outer: Vec<Jet> = x
        .iter()
        .map(|&v| Jet::constant(outer_cfg, v))
        .collect();
    let y_outer: Result<Vec<Jet>> = y
        .iter()
        .enumerate()
        .map(|(i, &v)| Jet::variable(outer_cfg, i, v))
        .collect();
    let ric_jet = ricci_scalar(f, &x_outer, &y_outer?)?;
    let ric_tensor = DMatrix::from_fn(n, n, |i, j| {
        ric_jet.partial(&[i, j]).map(|v| 0.5 * v).unwrap_or(f64::NAN)
    });

    Ok(FinslerCurvature { r, ric, ric_tensor })
}
