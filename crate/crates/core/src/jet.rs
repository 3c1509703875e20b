//! Truncated multivariate Taylor arithmetic ("jets").
//!
//! A [`Jet`] stores the Taylor coefficients of a smooth function around an
//! expansion point, for every multi-index of total degree up to a configured
//! `order`, over a declared set of `num_vars` independent variables.
//! Arithmetic and elementary functions are exact truncated Taylor
//! composition, so mixed partial derivatives extracted from a jet are exact
//! up to floating-point rounding; there is no finite differencing anywhere
//! in the engine.
//!
//! Coefficients live in any [`Scalar`] ring, so jets nest: a `Jet<Jet<f64>>`
//! carries derivatives of derivatives, which is how quantities needing more
//! total derivative order than a single jet's cap are assembled.
//!
//! Storage is dense, indexed by graded-lexicographic multi-index; the index
//! sets of lower orders are prefixes of higher ones, which makes truncation
//! and differentiation pure reindexing. Multiplication walks a precomputed
//! convolution table. Dimensions here are small (≤ 12 variables, order ≤ 4),
//! so dense wins over sparse on both simplicity and speed.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Maximum truncation order carried by a single jet.
pub const MAX_ORDER: usize = 4;

/// Maximum number of independent variables (packing limit of the index map).
pub const MAX_VARS: usize = 16;

/// Variable count and truncation order of a jet space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct JetConfig {
    num_vars: usize,
    order: usize,
}

impl JetConfig {
    /// `num_vars ≥ 2`, `order ∈ 1..=4`. Operations that need a derivative of
    /// total order `k` must run in a configuration with `order ≥ k`.
    pub fn new(num_vars: usize, order: usize) -> Result<Self> {
        if !(2..=MAX_VARS).contains(&num_vars) {
            return Err(Error::Config(format!(
                "jet configuration needs 2..={MAX_VARS} variables, got {num_vars}"
            )));
        }
        if order == 0 || order > MAX_ORDER {
            return Err(Error::Config(format!(
                "jet order must be in 1..={MAX_ORDER}, got {order}"
            )));
        }
        Ok(Self { num_vars, order })
    }

    /// Internal constructor that also admits order 0 (value-only jets that
    /// appear as results of repeated differentiation).
    fn unchecked(num_vars: usize, order: usize) -> Self {
        Self { num_vars, order }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn order(&self) -> usize {
        self.order
    }
}

/// Precomputed index structure shared by all jets of one configuration.
#[derive(Debug)]
pub struct JetTables {
    num_vars: usize,
    order: usize,
    /// Exponent tuples, flat, stride `num_vars`, graded-lexicographic.
    exponents: Vec<u8>,
    /// `offsets[d]` = position of the first multi-index of degree `d`;
    /// `offsets[order + 1]` = total coefficient count.
    offsets: Vec<usize>,
    /// Packed exponent tuple → position.
    position: HashMap<u64, u32>,
    /// All `(i, j, k)` with `deg(i) + deg(j) ≤ order` and `idx_k = idx_i + idx_j`.
    mul_pairs: Vec<(u32, u32, u32)>,
    /// `shift[v][p]` = position of `idx_p + e_v`, for `deg(idx_p) < order`.
    shift: Vec<Vec<u32>>,
}

impl JetTables {
    pub fn len(&self) -> usize {
        self.offsets[self.order + 1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn exponent(&self, pos: usize) -> &[u8] {
        &self.exponents[pos * self.num_vars..(pos + 1) * self.num_vars]
    }
}

fn pack(exp: &[u8]) -> u64 {
    let mut p = 0u64;
    for (v, &e) in exp.iter().enumerate() {
        debug_assert!(e < 16);
        p |= (e as u64) << (4 * v);
    }
    p
}

fn for_each_composition(degree: usize, vars: usize, f: &mut impl FnMut(&[u8])) {
    fn rec(buf: &mut Vec<u8>, remaining: usize, slots: usize, f: &mut impl FnMut(&[u8])) {
        if slots == 1 {
            buf.push(remaining as u8);
            f(buf);
            buf.pop();
            return;
        }
        for e in (0..=remaining).rev() {
            buf.push(e as u8);
            rec(buf, remaining - e, slots - 1, f);
            buf.pop();
        }
    }
    let mut buf = Vec::with_capacity(vars);
    rec(&mut buf, degree, vars, f);
}

fn build_tables(num_vars: usize, order: usize) -> JetTables {
    let mut exponents = Vec::new();
    let mut offsets = vec![0usize];
    for d in 0..=order {
        for_each_composition(d, num_vars, &mut |exp| exponents.extend_from_slice(exp));
        offsets.push(exponents.len() / num_vars);
    }
    let count = offsets[order + 1];

    let mut position = HashMap::with_capacity(count);
    for p in 0..count {
        position.insert(pack(&exponents[p * num_vars..(p + 1) * num_vars]), p as u32);
    }

    let degree_of = |p: usize| -> usize {
        exponents[p * num_vars..(p + 1) * num_vars]
            .iter()
            .map(|&e| e as usize)
            .sum()
    };

    let mut mul_pairs = Vec::new();
    let mut sum = vec![0u8; num_vars];
    for i in 0..count {
        let di = degree_of(i);
        for j in 0..offsets[order + 1 - di] {
            for v in 0..num_vars {
                sum[v] = exponents[i * num_vars + v] + exponents[j * num_vars + v];
            }
            let k = position[&pack(&sum)];
            mul_pairs.push((i as u32, j as u32, k));
        }
    }
    // Walk output positions in order: better accumulation locality.
    mul_pairs.sort_unstable_by_key(|&(_, _, k)| k);

    let mut shift = Vec::with_capacity(num_vars);
    for v in 0..num_vars {
        let mut col = Vec::with_capacity(offsets[order]);
        for p in 0..offsets[order] {
            for (w, s) in sum.iter_mut().enumerate() {
                *s = exponents[p * num_vars + w] + u8::from(w == v);
            }
            col.push(position[&pack(&sum)]);
        }
        shift.push(col);
    }

    JetTables {
        num_vars,
        order,
        exponents,
        offsets,
        position,
        mul_pairs,
        shift,
    }
}

fn tables_for(num_vars: usize, order: usize) -> Arc<JetTables> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetTables>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("jet table cache poisoned");
    map.entry((num_vars, order))
        .or_insert_with(|| Arc::new(build_tables(num_vars, order)))
        .clone()
}

/// All multi-indices of the given configuration, in the storage order
/// (graded-lexicographic).
pub fn multi_indices(num_vars: usize, order: usize) -> Vec<Vec<u8>> {
    let tables = tables_for(num_vars, order);
    (0..tables.len()).map(|p| tables.exponent(p).to_vec()).collect()
}

/// Truncated multivariate Taylor value with coefficients in `C`.
#[derive(Debug, Clone)]
pub struct Jet<C: Scalar = f64> {
    cfg: JetConfig,
    coeffs: Vec<C>,
    tables: Arc<JetTables>,
}

/// Seeds an independent variable: value coefficient `value`, first-order
/// coefficient 1 on its own index, 0 elsewhere.
pub fn seed_variable(index: usize, value: f64, cfg: JetConfig) -> Result<Jet> {
    Jet::variable(cfg, index, value)
}

impl<C: Scalar> Jet<C> {
    pub fn constant(cfg: JetConfig, value: C) -> Self {
        let tables = tables_for(cfg.num_vars, cfg.order);
        let mut coeffs = vec![value.lift(0.0); tables.len()];
        coeffs[0] = value;
        Self {
            cfg,
            coeffs,
            tables,
        }
    }

    pub fn variable(cfg: JetConfig, index: usize, value: C) -> Result<Self> {
        if index >= cfg.num_vars {
            return Err(Error::Config(format!(
                "variable index {index} out of range for {} variables",
                cfg.num_vars
            )));
        }
        let mut jet = Self::constant(cfg, value);
        if cfg.order >= 1 {
            // Position of e_index within the degree-1 block.
            let pos = jet.tables.offsets[1] + index;
            debug_assert_eq!(jet.tables.exponent(pos)[index], 1);
            jet.coeffs[pos] = jet.coeffs[0].lift(1.0);
        }
        Ok(jet)
    }

    /// Builds a jet from explicit Taylor coefficients, requested per
    /// multi-index (exponent tuple).
    pub fn from_taylor_fn(
        cfg: JetConfig,
        mut f: impl FnMut(&[u8]) -> Result<C>,
    ) -> Result<Self> {
        let tables = tables_for(cfg.num_vars, cfg.order);
        let coeffs: Result<Vec<C>> = (0..tables.len()).map(|p| f(tables.exponent(p))).collect();
        Ok(Self {
            cfg,
            coeffs: coeffs?,
            tables,
        })
    }

    /// The raw Taylor coefficient at an exponent tuple (the partial
    /// derivative divided by the multi-index factorial).
    pub fn taylor_coefficient(&self, exponents: &[u8]) -> Result<&C> {
        if exponents.len() != self.cfg.num_vars {
            return Err(Error::Config(format!(
                "exponent tuple of length {} for {} variables",
                exponents.len(),
                self.cfg.num_vars
            )));
        }
        let degree: usize = exponents.iter().map(|&e| e as usize).sum();
        if degree > self.cfg.order {
            return Err(Error::OrderExceeded {
                requested: degree,
                order: self.cfg.order,
            });
        }
        Ok(&self.coeffs[self.tables.position[&pack(exponents)] as usize])
    }

    pub fn config(&self) -> JetConfig {
        self.cfg
    }

    pub fn order(&self) -> usize {
        self.cfg.order
    }

    pub fn num_vars(&self) -> usize {
        self.cfg.num_vars
    }

    /// The value coefficient (the function value at the expansion point).
    pub fn value_coeff(&self) -> &C {
        &self.coeffs[0]
    }

    /// The true mixed partial derivative along the listed variable indices
    /// (repeats mean higher order): the stored Taylor coefficient times the
    /// multi-index factorial.
    ///
    /// Requesting a total order above the configured one is an error, never a
    /// silent zero.
    pub fn partial(&self, dirs: &[usize]) -> Result<C> {
        if dirs.len() > self.cfg.order {
            return Err(Error::OrderExceeded {
                requested: dirs.len(),
                order: self.cfg.order,
            });
        }
        let mut exp = vec![0u8; self.cfg.num_vars];
        for &d in dirs {
            if d >= self.cfg.num_vars {
                return Err(Error::Config(format!(
                    "variable index {d} out of range for {} variables",
                    self.cfg.num_vars
                )));
            }
            exp[d] += 1;
        }
        let pos = self.tables.position[&pack(&exp)] as usize;
        let mut factorial = 1.0;
        for &e in &exp {
            for k in 2..=e as u64 {
                factorial *= k as f64;
            }
        }
        Ok(self.coeffs[pos].scale(factorial))
    }

    /// Jet of `∂f/∂x_v`, one order lower.
    pub fn derivative(&self, v: usize) -> Result<Self> {
        if self.cfg.order == 0 {
            return Err(Error::OrderExceeded {
                requested: 1,
                order: 0,
            });
        }
        if v >= self.cfg.num_vars {
            return Err(Error::Config(format!(
                "variable index {v} out of range for {} variables",
                self.cfg.num_vars
            )));
        }
        let cfg = JetConfig::unchecked(self.cfg.num_vars, self.cfg.order - 1);
        let tables = tables_for(cfg.num_vars, cfg.order);
        let shift = &self.tables.shift[v];
        let coeffs = (0..tables.len())
            .map(|p| {
                let src = shift[p] as usize;
                let e = self.tables.exponent(p)[v] as f64;
                self.coeffs[src].scale(e + 1.0)
            })
            .collect();
        Ok(Self {
            cfg,
            coeffs,
            tables,
        })
    }

    fn truncated(&self, order: usize) -> Self {
        if order == self.cfg.order {
            return self.clone();
        }
        let cfg = JetConfig::unchecked(self.cfg.num_vars, order);
        let tables = tables_for(cfg.num_vars, cfg.order);
        Self {
            cfg,
            coeffs: self.coeffs[..tables.len()].to_vec(),
            tables,
        }
    }

    fn zip_order(&self, rhs: &Self) -> usize {
        assert_eq!(
            self.cfg.num_vars, rhs.cfg.num_vars,
            "jets from different variable sets"
        );
        self.cfg.order.min(rhs.cfg.order)
    }

    fn add_impl(&self, rhs: &Self) -> Self {
        let order = self.zip_order(rhs);
        let tables = tables_for(self.cfg.num_vars, order);
        let coeffs = (0..tables.len())
            .map(|p| self.coeffs[p].clone() + rhs.coeffs[p].clone())
            .collect();
        Self {
            cfg: JetConfig::unchecked(self.cfg.num_vars, order),
            coeffs,
            tables,
        }
    }

    fn sub_impl(&self, rhs: &Self) -> Self {
        let order = self.zip_order(rhs);
        let tables = tables_for(self.cfg.num_vars, order);
        let coeffs = (0..tables.len())
            .map(|p| self.coeffs[p].clone() - rhs.coeffs[p].clone())
            .collect();
        Self {
            cfg: JetConfig::unchecked(self.cfg.num_vars, order),
            coeffs,
            tables,
        }
    }

    fn mul_impl(&self, rhs: &Self) -> Self {
        let order = self.zip_order(rhs);
        if order == 0 {
            return Self::constant(
                JetConfig::unchecked(self.cfg.num_vars, 0),
                self.coeffs[0].clone() * rhs.coeffs[0].clone(),
            );
        }
        let tables = tables_for(self.cfg.num_vars, order);
        let mut coeffs = vec![self.coeffs[0].lift(0.0); tables.len()];
        for &(i, j, k) in &tables.mul_pairs {
            coeffs[k as usize].add_assign_prod(&self.coeffs[i as usize], &rhs.coeffs[j as usize]);
        }
        Self {
            cfg: JetConfig::unchecked(self.cfg.num_vars, order),
            coeffs,
            tables,
        }
    }

    /// Taylor composition `f(self)` from the coefficients
    /// `derivs[k] = f⁽ᵏ⁾(value)/k!`, by Horner evaluation in the nilpotent
    /// part.
    fn compose(&self, derivs: &[C]) -> Self {
        debug_assert_eq!(derivs.len(), self.cfg.order + 1);
        if self.cfg.order == 0 {
            return Self::constant(self.cfg, derivs[0].clone());
        }
        let mut nil = self.clone();
        nil.coeffs[0] = nil.coeffs[0].lift(0.0);
        let mut acc = Self::constant(self.cfg, derivs[self.cfg.order].clone());
        for k in (0..self.cfg.order).rev() {
            acc = acc.mul_impl(&nil);
            acc.coeffs[0] = acc.coeffs[0].clone() + derivs[k].clone();
        }
        acc
    }

    fn scale_impl(&self, k: f64) -> Self {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c = c.scale(k);
        }
        out
    }

    pub fn exp(&self) -> Self {
        if self.cfg.order == 0 {
            return Self::constant(self.cfg, self.coeffs[0].exp());
        }
        let e = self.coeffs[0].exp();
        let mut derivs = Vec::with_capacity(self.cfg.order + 1);
        let mut factorial = 1.0;
        for k in 0..=self.cfg.order {
            if k > 0 {
                factorial *= k as f64;
            }
            derivs.push(e.scale(1.0 / factorial));
        }
        self.compose(&derivs)
    }

    pub fn try_ln(&self) -> Result<Self> {
        if self.cfg.order == 0 {
            return Ok(Self::constant(self.cfg, self.coeffs[0].try_ln()?));
        }
        if self.value() <= 0.0 {
            return Err(Error::Domain(format!(
                "log of non-positive value coefficient {}",
                self.value()
            )));
        }
        let mut derivs = Vec::with_capacity(self.cfg.order + 1);
        derivs.push(self.coeffs[0].try_ln()?);
        let r = self.coeffs[0].try_recip()?;
        let mut running = self.coeffs[0].lift(1.0);
        for k in 1..=self.cfg.order {
            running = running * r.clone();
            let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
            derivs.push(running.scale(sign / k as f64));
        }
        Ok(self.compose(&derivs))
    }

    pub fn sin(&self) -> Self {
        if self.cfg.order == 0 {
            return Self::constant(self.cfg, self.coeffs[0].sin());
        }
        let (s, c) = (self.coeffs[0].sin(), self.coeffs[0].cos());
        let mut derivs = Vec::with_capacity(self.cfg.order + 1);
        let mut factorial = 1.0;
        for k in 0..=self.cfg.order {
            if k > 0 {
                factorial *= k as f64;
            }
            let cyc = match k % 4 {
                0 => s.clone(),
                1 => c.clone(),
                2 => -s.clone(),
                _ => -c.clone(),
            };
            derivs.push(cyc.scale(1.0 / factorial));
        }
        self.compose(&derivs)
    }

    pub fn cos(&self) -> Self {
        if self.cfg.order == 0 {
            return Self::constant(self.cfg, self.coeffs[0].cos());
        }
        let (s, c) = (self.coeffs[0].sin(), self.coeffs[0].cos());
        let mut derivs = Vec::with_capacity(self.cfg.order + 1);
        let mut factorial = 1.0;
        for k in 0..=self.cfg.order {
            if k > 0 {
                factorial *= k as f64;
            }
            let cyc = match k % 4 {
                0 => c.clone(),
                1 => -s.clone(),
                2 => -c.clone(),
                _ => s.clone(),
            };
            derivs.push(cyc.scale(1.0 / factorial));
        }
        self.compose(&derivs)
    }

    pub fn tanh(&self) -> Self {
        if self.cfg.order == 0 {
            return Self::constant(self.cfg, self.coeffs[0].tanh());
        }
        // tanh(x) = 1 - 2 / (exp(2x) + 1); exp(2x) + 1 > 0, so the division
        // is total and this stays exact truncated composition.
        let one = Self::constant(self.cfg, self.coeffs[0].lift(1.0));
        let two = Self::constant(self.cfg, self.coeffs[0].lift(2.0));
        let denom = self.scale_impl(2.0).exp().add_impl(&one);
        let frac = two
            .try_div_impl(&denom)
            .expect("exp(2x) + 1 has positive value coefficient");
        one.sub_impl(&frac)
    }

    pub fn try_sqrt(&self) -> Result<Self> {
        if self.cfg.order == 0 {
            return Ok(Self::constant(self.cfg, self.coeffs[0].try_sqrt()?));
        }
        self.try_powf_impl(0.5)
    }

    pub fn try_powf_impl(&self, p: f64) -> Result<Self> {
        if p.fract() == 0.0 && p.abs() < 2f64.powi(31) {
            return self.powi_impl(p as i64);
        }
        if self.cfg.order == 0 {
            return Ok(Self::constant(self.cfg, self.coeffs[0].try_powf(p)?));
        }
        if self.value() <= 0.0 {
            return Err(Error::Domain(format!(
                "power {p} of non-positive value coefficient {}",
                self.value()
            )));
        }
        let v_pow = self.coeffs[0].try_powf(p)?;
        let r = self.coeffs[0].try_recip()?;
        let mut derivs = Vec::with_capacity(self.cfg.order + 1);
        derivs.push(v_pow.clone());
        let mut running = v_pow;
        let mut binom = 1.0;
        for k in 1..=self.cfg.order {
            binom *= (p - (k as f64 - 1.0)) / k as f64;
            running = running * r.clone();
            derivs.push(running.scale(binom));
        }
        Ok(self.compose(&derivs))
    }

    pub fn powi_impl(&self, n: i64) -> Result<Self> {
        if n < 0 {
            return self.try_recip_impl()?.powi_impl(-n);
        }
        let mut acc = Self::constant(self.cfg, self.coeffs[0].lift(1.0));
        let mut base = self.clone();
        let mut n = n as u64;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul_impl(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul_impl(&base);
            }
        }
        Ok(acc)
    }

    pub fn try_recip_impl(&self) -> Result<Self> {
        if self.cfg.order == 0 {
            return Ok(Self::constant(self.cfg, self.coeffs[0].try_recip()?));
        }
        if self.value() == 0.0 {
            return Err(Error::Domain(
                "division by a jet with zero value coefficient".into(),
            ));
        }
        let r = self.coeffs[0].try_recip()?;
        let mut derivs = Vec::with_capacity(self.cfg.order + 1);
        derivs.push(r.clone());
        let mut running = r.clone();
        for k in 1..=self.cfg.order {
            running = running * r.clone();
            derivs.push(if k % 2 == 1 {
                -running.clone()
            } else {
                running.clone()
            });
        }
        Ok(self.compose(&derivs))
    }

    pub fn try_div_impl(&self, rhs: &Self) -> Result<Self> {
        let order = self.zip_order(rhs);
        if order == 0 {
            return Ok(Self::constant(
                JetConfig::unchecked(self.cfg.num_vars, 0),
                self.coeffs[0].try_div(&rhs.coeffs[0])?,
            ));
        }
        Ok(self.truncated(order).mul_impl(&rhs.try_recip_impl()?))
    }
}

impl<C: Scalar> Add for Jet<C> {
    type Output = Jet<C>;
    fn add(self, rhs: Self) -> Self {
        self.add_impl(&rhs)
    }
}

impl<C: Scalar> Sub for Jet<C> {
    type Output = Jet<C>;
    fn sub(self, rhs: Self) -> Self {
        self.sub_impl(&rhs)
    }
}

impl<C: Scalar> Mul for Jet<C> {
    type Output = Jet<C>;
    fn mul(self, rhs: Self) -> Self {
        self.mul_impl(&rhs)
    }
}

impl<C: Scalar> Neg for Jet<C> {
    type Output = Jet<C>;
    fn neg(self) -> Self {
        self.scale_impl(-1.0)
    }
}

impl<C: Scalar> Scalar for Jet<C> {
    fn lift(&self, v: f64) -> Self {
        Self::constant(self.cfg, self.coeffs[0].lift(v))
    }

    fn value(&self) -> f64 {
        self.coeffs[0].value()
    }

    fn is_constant(&self) -> bool {
        self.coeffs[0].is_constant()
            && self.coeffs[1..]
                .iter()
                .all(|c| c.is_constant() && c.value() == 0.0)
    }

    fn scale(&self, k: f64) -> Self {
        self.scale_impl(k)
    }

    fn add_assign_prod(&mut self, a: &Self, b: &Self) {
        // In-place convolution; recursion bottoms out in f64 FMA-style
        // accumulation without intermediate jet allocations.
        let order = a.zip_order(b).min(self.cfg.order);
        let tables = tables_for(self.cfg.num_vars, order);
        for &(i, j, k) in &tables.mul_pairs {
            let (i, j, k) = (i as usize, j as usize, k as usize);
            self.coeffs[k].add_assign_prod(&a.coeffs[i], &b.coeffs[j]);
        }
    }

    fn try_recip(&self) -> Result<Self> {
        self.try_recip_impl()
    }

    fn try_div(&self, rhs: &Self) -> Result<Self> {
        self.try_div_impl(rhs)
    }

    fn exp(&self) -> Self {
        Jet::exp(self)
    }

    fn try_ln(&self) -> Result<Self> {
        Jet::try_ln(self)
    }

    fn sin(&self) -> Self {
        Jet::sin(self)
    }

    fn cos(&self) -> Self {
        Jet::cos(self)
    }

    fn tanh(&self) -> Self {
        Jet::tanh(self)
    }

    fn try_sqrt(&self) -> Result<Self> {
        Jet::try_sqrt(self)
    }

    fn try_powf(&self, p: f64) -> Result<Self> {
        self.try_powf_impl(p)
    }

    fn powi(&self, n: i64) -> Result<Self> {
        self.powi_impl(n)
    }
}
