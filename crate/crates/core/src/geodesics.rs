//! Spray-curve integration.
//!
//! Solves `ẍ^k = −G^k(x, ẋ)` for a 2-homogeneous spray `G` with an embedded
//! Dormand–Prince 5(4) pair and proportional step control. For Berwald
//! sprays `G^k = Γ^k_ij y^i y^j` this is the geodesic equation
//! `ẍ^k + Γ^k_ij ẋ^i ẋ^j = 0`.

use crate::error::{Error, Result};
use crate::geometry::{christoffel, metric_at, MetricEval, Point};

/// A second-order vector field `G^k(x, y)`, 2-homogeneous in `y`.
pub trait Spray {
    fn dim(&self) -> usize;

    fn accel(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>>;
}

impl<F: Fn(&[f64], &[f64]) -> Result<Vec<f64>>> Spray for (usize, F) {
    fn dim(&self) -> usize {
        self.0
    }

    fn accel(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        (self.1)(x, y)
    }
}

/// Position, velocity, and affine parameter of an integration state.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicState {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl GeodesicState {
    pub fn new(t: f64, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Config(format!(
                "position has dimension {} but velocity has {}",
                x.len(),
                y.len()
            )));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite initial state".into()));
        }
        if y.iter().all(|&v| v == 0.0) {
            return Err(Error::Config("velocity must be nonzero".into()));
        }
        Ok(Self { t, x, y })
    }
}

/// Adaptive embedded Runge–Kutta 4(5) configuration.
#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
}

impl IntegratorConfig {
    pub fn new(rel_tol: f64, abs_tol: f64, max_steps: usize) -> Result<Self> {
        for (name, v) in [("rel_tol", rel_tol), ("abs_tol", abs_tol)] {
            if !(1e-13..=1e-3).contains(&v) {
                return Err(Error::Config(format!(
                    "{name} must lie in [1e-13, 1e-3], got {v:e}"
                )));
            }
        }
        if max_steps == 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        Ok(Self {
            rel_tol,
            abs_tol,
            max_steps,
        })
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_steps: 100_000,
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn derivative<S: Spray>(spray: &S, state: &[f64]) -> Result<Vec<f64>> {
    let n = spray.dim();
    let (x, y) = state.split_at(n);
    let g = spray.accel(x, y)?;
    let mut d = Vec::with_capacity(2 * n);
    d.extend_from_slice(y);
    d.extend(g.iter().map(|v| -v));
    Ok(d)
}

fn rk_step<S: Spray>(spray: &S, state: &[f64], h: f64) -> Result<(Vec<f64>, f64)> {
    let dim = state.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(derivative(spray, state)?);
    for stage in 1..7 {
        let mut trial = state.to_vec();
        for (s, ks) in k.iter().enumerate() {
            let a = A[stage][s];
            if a != 0.0 {
                for i in 0..dim {
                    trial[i] += h * a * ks[i];
                }
            }
        }
        k.push(derivative(spray, &trial)?);
    }
    let mut out = state.to_vec();
    let mut err = vec![0.0; dim];
    for (s, ks) in k.iter().enumerate() {
        for i in 0..dim {
            out[i] += h * B5[s] * ks[i];
            err[i] += h * (B5[s] - B4[s]) * ks[i];
        }
    }
    let _ = C;
    Ok((out, err.iter().fold(0.0f64, |m, e| m.max(e.abs()))))
}

fn error_norm(err_max: f64, state: &[f64], next: &[f64], cfg: &IntegratorConfig) -> f64 {
    let scale = cfg.abs_tol
        + cfg.rel_tol
            * state
                .iter()
                .chain(next)
                .fold(0.0f64, |m, v| m.max(v.abs()));
    err_max / scale
}

/// Integrates the spray curve from `init` to `t_end`, returning the accepted
/// states (monotone in `t`, starting with `init`).
///
/// Domain exits (the spray erroring out) and step-budget exhaustion are
/// reported together with the last valid state inside the error message.
pub fn integrate<S: Spray>(
    spray: &S,
    init: &GeodesicState,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<GeodesicState>> {
    let n = spray.dim();
    if init.x.len() != n {
        return Err(Error::Config(format!(
            "initial state has dimension {} but the spray has {n}",
            init.x.len()
        )));
    }
    if t_end <= init.t {
        return Err(Error::Precondition(format!(
            "t_end = {t_end} must exceed the initial parameter {}",
            init.t
        )));
    }
    let mut state: Vec<f64> = init.x.iter().chain(&init.y).cloned().collect();
    let mut t = init.t;
    let mut h = (t_end - init.t) / 100.0;
    let mut trajectory = vec![init.clone()];
    let span = t_end - init.t;

    let exit = |msg: String, trajectory: &[GeodesicState]| -> Error {
        let last = trajectory.last().expect("non-empty trajectory");
        Error::Numerical(format!(
            "{msg}; last valid state t = {}, x = {:?}, y = {:?}",
            last.t, last.x, last.y
        ))
    };

    for _step in 0..cfg.max_steps {
        if t >= t_end {
            return Ok(trajectory);
        }
        h = h.min(t_end - t);
        let (next, err_max) = match rk_step(spray, &state, h) {
            Ok(v) => v,
            Err(e) => {
                return Err(exit(
                    format!("spray evaluation failed during a step: {e}"),
                    &trajectory,
                ))
            }
        };
        let norm = error_norm(err_max, &state, &next, cfg);
        if norm <= 1.0 {
            t += h;
            state = next;
            trajectory.push(GeodesicState {
                t,
                x: state[..n].to_vec(),
                y: state[n..].to_vec(),
            });
        }
        let factor = if norm > 0.0 {
            (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
        if h < 1e-14 * span {
            return Err(exit("step size underflow".into(), &trajectory));
        }
    }
    if t >= t_end {
        Ok(trajectory)
    } else {
        Err(exit(
            format!("step budget of {} exhausted at t = {t}", cfg.max_steps),
            &trajectory,
        ))
    }
}

/// Fixed-step variant of the same scheme (used for convergence studies).
pub fn integrate_fixed_step<S: Spray>(
    spray: &S,
    init: &GeodesicState,
    t_end: f64,
    h: f64,
) -> Result<Vec<GeodesicState>> {
    let n = spray.dim();
    if h <= 0.0 {
        return Err(Error::Config("step size must be positive".into()));
    }
    let mut state: Vec<f64> = init.x.iter().chain(&init.y).cloned().collect();
    let mut t = init.t;
    let mut trajectory = vec![init.clone()];
    while t < t_end - 1e-15 {
        let step = h.min(t_end - t);
        let (next, _err) = rk_step(spray, &state, step)?;
        t += step;
        state = next;
        trajectory.push(GeodesicState {
            t,
            x: state[..n].to_vec(),
            y: state[n..].to_vec(),
        });
    }
    Ok(trajectory)
}

/// Outcome of the null-geodesic coincidence measurement.
#[derive(Debug, Clone)]
pub struct NullComparison {
    /// Max, over accepted steps, of the component of the reference-metric
    /// geodesic residual orthogonal to the velocity, normalized by |ẋ|².
    pub max_orthogonal_residual: f64,
    /// Max |a(ẋ, ẋ)| along the flow.
    pub max_null_violation: f64,
    pub steps: usize,
}

/// Integrates the spray from a null initial state and measures, at every
/// accepted step, the geodesic residual `r^k = ẍ^k + Γ^k_ij ẋ^i ẋ^j` of the
/// reference metric. Only the component of `r` orthogonal to `ẋ` (Euclidean
/// sense) counts: the curves are compared as unparameterized sets, and
/// reparameterization shifts `r` along `ẋ`.
pub fn compare_null_geodesics<S: Spray>(
    spray: &S,
    reference: &impl MetricEval,
    init: &GeodesicState,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<NullComparison> {
    let n = spray.dim();
    let p0 = Point::new(init.x.clone())?;
    let a0 = metric_at(reference, &p0)?;
    let mut norm2 = 0.0;
    let mut null0 = 0.0;
    for i in 0..n {
        norm2 += init.y[i] * init.y[i];
        for j in 0..n {
            null0 += a0[(i, j)] * init.y[i] * init.y[j];
        }
    }
    if null0.abs() > 1e-10 * norm2 {
        return Err(Error::Precondition(format!(
            "initial velocity is not null: a(y, y) = {null0:.3e}"
        )));
    }

    let trajectory = integrate(spray, init, t_end, cfg)?;
    let mut max_orth = 0.0f64;
    let mut max_null = 0.0f64;
    for state in &trajectory {
        let p = Point::new(state.x.clone())?;
        let gamma = christoffel(reference, &p)?;
        let accel = spray.accel(&state.x, &state.y)?;
        let mut r = vec![0.0; n];
        for k in 0..n {
            let mut gyy = 0.0;
            for i in 0..n {
                for j in 0..n {
                    gyy += gamma[(k, i, j)] * state.y[i] * state.y[j];
                }
            }
            r[k] = gyy - accel[k];
        }
        let speed2: f64 = state.y.iter().map(|v| v * v).sum();
        let r_dot_y: f64 = r.iter().zip(&state.y).map(|(a, b)| a * b).sum();
        let mut orth2 = 0.0;
        for k in 0..n {
            let o = r[k] - r_dot_y / speed2 * state.y[k];
            orth2 += o * o;
        }
        max_orth = max_orth.max(orth2.sqrt() / speed2);

        let a = metric_at(reference, &p)?;
        let mut null = 0.0;
        for i in 0..n {
            for j in 0..n {
                null += a[(i, j)] * state.y[i] * state.y[j];
            }
        }
        max_null = max_null.max(null.abs());
    }
    Ok(NullComparison {
        max_orthogonal_residual: max_orth,
        max_null_violation: max_null,
        steps: trajectory.len(),
    })
}

/// Writes a trajectory as CSV rows `t,x1..xn,y1..yn` with 17 significant
/// digits.
pub fn trajectory_to_csv(trajectory: &[GeodesicState]) -> String {
    let n = trajectory.first().map(|s| s.x.len()).unwrap_or(0);
    let mut out = String::from("t");
    for i in 1..=n {
        out.push_str(&format!(",x{i}"));
    }
    for i in 1..=n {
        out.push_str(&format!(",y{i}"));
    }
    out.push('\n');
    for s in trajectory {
        out.push_str(&format!("{:.16e}", s.t));
        for v in s.x.iter().chain(&s.y) {
            out.push_str(&format!(",{v:.16e}"));
        }
        out.push('\n');
    }
    out
}
