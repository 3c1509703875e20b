//! Configuration ingestion: a self-describing JSON document with
//! string-valued coordinate expressions.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::ExprAst;
use crate::geometry::{MetricField, OneFormField, Point};
use crate::kropina::{KundtForm, MKropinaSpace};
use crate::linalg::SquareMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Adapted null coordinates: `H`, `W[a]`, `h[a][b]` with `b = du`.
    Kundt,
    /// Arbitrary `a[i][j]`, `b[i]`.
    General,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Kundt => "kundt",
            Mode::General => "general",
        }
    }
}

fn default_grid_counts() -> usize {
    3
}

fn default_random_points() -> usize {
    50
}

/// Point sampling: a tensor grid over per-coordinate ranges plus seeded
/// uniform draws.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    /// Per-coordinate `[lo, hi]`; defaults to `[-1, 1]` everywhere.
    #[serde(default)]
    pub ranges: Option<Vec<[f64; 2]>>,
    /// Grid points per axis.
    #[serde(default = "default_grid_counts")]
    pub grid_counts: usize,
    /// Extra uniform sample points for residual sweeps.
    #[serde(default = "default_random_points")]
    pub random_points: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            ranges: None,
            grid_counts: default_grid_counts(),
            random_points: default_random_points(),
            seed: 0,
        }
    }
}

impl SamplingConfig {
    fn range(&self, dim: usize) -> Result<Vec<[f64; 2]>> {
        match &self.ranges {
            None => Ok(vec![[-1.0, 1.0]; dim]),
            Some(r) if r.len() == dim => {
                for (i, [lo, hi]) in r.iter().enumerate() {
                    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                        return Err(Error::Config(format!(
                            "sampling range {i} is not a finite interval: [{lo}, {hi}]"
                        )));
                    }
                }
                Ok(r.clone())
            }
            Some(r) => Err(Error::Config(format!(
                "{} sampling ranges for dimension {dim}",
                r.len()
            ))),
        }
    }

    /// Tensor-product grid, `counts` points per axis.
    pub fn grid(&self, dim: usize, counts: usize) -> Result<Vec<Point>> {
        let ranges = self.range(dim)?;
        if counts == 0 {
            return Err(Error::Config("grid density must be positive".into()));
        }
        let mut points = Vec::with_capacity(counts.pow(dim as u32));
        let mut idx = vec![0usize; dim];
        loop {
            let coords: Vec<f64> = (0..dim)
                .map(|d| {
                    let [lo, hi] = ranges[d];
                    if counts == 1 {
                        0.5 * (lo + hi)
                    } else {
                        lo + (hi - lo) * idx[d] as f64 / (counts - 1) as f64
                    }
                })
                .collect();
            points.push(Point::new(coords)?);
            let mut d = 0;
            loop {
                if d == dim {
                    return Ok(points);
                }
                idx[d] += 1;
                if idx[d] < counts {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }

    /// Seeded uniform draws inside the ranges; `salt` decorrelates distinct
    /// consumers.
    pub fn random(&self, dim: usize, count: usize, salt: u64) -> Result<Vec<Point>> {
        let ranges = self.range(dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(salt));
        (0..count)
            .map(|_| {
                Point::new(
                    (0..dim)
                        .map(|d| rng.gen_range(ranges[d][0]..ranges[d][1]))
                        .collect(),
                )
            })
            .collect()
    }
}

/// One analyzable geometry, as read from a config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub name: String,
    pub dimension: usize,
    pub mode: Mode,
    pub m: f64,
    #[serde(default)]
    pub coordinates: Option<Vec<String>>,
    /// Kundt mode: `H(u, v, x)`.
    #[serde(default, rename = "H")]
    pub h_uu: Option<String>,
    /// Kundt mode: `W[a](u, x)`, length `dimension − 2`.
    #[serde(default, rename = "W")]
    pub w: Option<Vec<String>>,
    /// Kundt mode: `h[a][b](u, x)`, symmetric `(dimension − 2)²`.
    #[serde(default)]
    pub h: Option<Vec<Vec<String>>>,
    /// General mode: metric components `a[i][j]`.
    #[serde(default)]
    pub a: Option<Vec<Vec<String>>>,
    /// General mode: 1-form components `b[i]`.
    #[serde(default)]
    pub b: Option<Vec<String>>,
    #[serde(default)]
    pub sampling: SamplingConfig,
    /// Quadrature base point of the metrizing conformal factor.
    #[serde(default)]
    pub u0: f64,
}

impl GeometryConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: GeometryConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.dimension < 3 {
            return Err(Error::Config(format!(
                "dimension must exceed 2, got {}",
                self.dimension
            )));
        }
        if let Some(coords) = &self.coordinates {
            if coords.len() != self.dimension {
                return Err(Error::Config(format!(
                    "{} coordinate names for dimension {}",
                    coords.len(),
                    self.dimension
                )));
            }
        }
        match self.mode {
            Mode::Kundt => {
                if self.h_uu.is_none() || self.w.is_none() || self.h.is_none() {
                    return Err(Error::Config(
                        "kundt mode requires the fields H, W and h".into(),
                    ));
                }
            }
            Mode::General => {
                if self.a.is_none() || self.b.is_none() {
                    return Err(Error::Config(
                        "general mode requires the fields a and b".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn coordinate_names(&self) -> Vec<String> {
        if let Some(c) = &self.coordinates {
            return c.clone();
        }
        match self.mode {
            Mode::Kundt => {
                let mut names = vec!["u".to_string(), "v".to_string()];
                names.extend((3..=self.dimension).map(|i| format!("x{i}")));
                names
            }
            Mode::General => (1..=self.dimension).map(|i| format!("x{i}")).collect(),
        }
    }

    /// Builds the geometry. A kundt-mode config whose `W`/`h` illegally
    /// involve `v` is not an adapted chart; it falls back to the general
    /// route (where the Berwald check will fail honestly) instead of being
    /// rejected outright.
    pub fn build(&self) -> Result<LoadedGeometry> {
        let coords = self.coordinate_names();
        let coord_refs: Vec<&str> = coords.iter().map(|s| s.as_str()).collect();
        match self.mode {
            Mode::Kundt => {
                let n = self.dimension;
                let k = n - 2;
                let h_uu = self.h_uu.as_ref().expect("validated");
                let w = self.w.as_ref().expect("validated");
                let h = self.h.as_ref().expect("validated");
                if w.len() != k || h.len() != k || h.iter().any(|r| r.len() != k) {
                    return Err(Error::Config(format!(
                        "kundt mode with dimension {n} needs {k} W components and a {k}x{k} h matrix"
                    )));
                }
                let h_ast = ExprAst::parse_str(h_uu)?;
                let w_ast: Result<Vec<_>> = w.iter().map(|s| ExprAst::parse_str(s)).collect();
                let w_ast = w_ast?;
                let mut h_flat = Vec::with_capacity(k * k);
                for row in h {
                    for src in row {
                        h_flat.push(ExprAst::parse_str(src)?);
                    }
                }
                let h_mat = SquareMatrix::from_fn(k, |i, j| h_flat[i * k + j].clone());

                let v_name = &coords[1];
                let transverse_clean = w_ast
                    .iter()
                    .chain((0..k * k).map(|i| &h_flat[i]))
                    .all(|e| !e.variables().contains(v_name));
                if transverse_clean {
                    let kundt = KundtForm::new(coords, h_ast, w_ast, h_mat)?;
                    let space = kundt.space(self.m)?;
                    Ok(LoadedGeometry {
                        kundt: Some(kundt),
                        space,
                    })
                } else {
                    // Same metric data, full v-dependence, b = du.
                    let half = |e: &ExprAst| {
                        ExprAst::Binary(
                            crate::expr::BinaryOp::Mul,
                            Box::new(ExprAst::Const(0.5)),
                            Box::new(e.clone()),
                        )
                    };
                    let comps = SquareMatrix::from_fn(n, |i, j| match (i, j) {
                        (0, 0) => h_ast.clone(),
                        (0, 1) | (1, 0) => ExprAst::Const(-1.0),
                        (0, a) => half(&w_ast[a - 2]),
                        (a, 0) => half(&w_ast[a - 2]),
                        (1, _) | (_, 1) => ExprAst::Const(0.0),
                        (a, b) => h_mat[(a - 2, b - 2)].clone(),
                    });
                    let metric = MetricField::new(coords.clone(), comps)?;
                    let mut b_comps = vec![ExprAst::Const(0.0); n];
                    b_comps[0] = ExprAst::Const(1.0);
                    let oneform = OneFormField::new(coords, b_comps)?;
                    let probe = self.sampling.random(n, 20, 0xb2)?;
                    let space = MKropinaSpace::new(metric, oneform, self.m, &probe)?;
                    Ok(LoadedGeometry { kundt: None, space })
                }
            }
            Mode::General => {
                let a = self.a.as_ref().expect("validated");
                let b = self.b.as_ref().expect("validated");
                let n = self.dimension;
                if a.len() != n || a.iter().any(|r| r.len() != n) || b.len() != n {
                    return Err(Error::Config(format!(
                        "general mode with dimension {n} needs an {n}x{n} metric and {n} 1-form components"
                    )));
                }
                let a_refs: Vec<Vec<&str>> =
                    a.iter().map(|r| r.iter().map(|s| s.as_str()).collect()).collect();
                let a_rows: Vec<&[&str]> = a_refs.iter().map(|r| r.as_slice()).collect();
                let metric = MetricField::from_strings(&coord_refs, &a_rows)?;
                let b_refs: Vec<&str> = b.iter().map(|s| s.as_str()).collect();
                let oneform = OneFormField::from_strings(&coord_refs, &b_refs)?;
                let probe = self.sampling.random(n, 20, 0xb2)?;
                let space = MKropinaSpace::new(metric, oneform, self.m, &probe)?;
                Ok(LoadedGeometry { kundt: None, space })
            }
        }
    }
}

/// A built geometry: the adapted chart when the input is one, and the
/// m-Kropina space either way.
#[derive(Debug, Clone)]
pub struct LoadedGeometry {
    pub kundt: Option<KundtForm>,
    pub space: MKropinaSpace,
}
