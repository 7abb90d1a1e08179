//! Local-stochastic volatility models for the ETF and their generator
//! coefficients.
//!
//! Each model is described by the four functions of the joint generator of
//! `(X, Y, Z)`:
//!
//! ```text
//! A = a [(∂x² - ∂x) + β²(∂z² - ∂z) + 2β ∂x∂z] + b ∂y² + c ∂y + f (∂x∂y + β ∂y∂z)
//! ```
//!
//! with `a = σ²/2`, `b = g²/2`, `f = gσρ`. Taylor tables hold
//! `∂x^i ∂y^j χ / (i! j!)` at the expansion point for `χ ∈ {a, b, c, f}`.
//!
//! The admissible `(x, y)` domain is taken to be the whole plane for every
//! model; local ellipticity is not checked.

use std::collections::BTreeMap;
use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::opalgebra::Scalar;

/// Maximum expansion order supported by the operator engine.
pub const MAX_ORDER: usize = 4;

/// Evaluation coordinates for one option on the LETF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketPoint {
    pub t: f64,
    pub maturity: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub k: f64,
    pub beta: f64,
}

impl MarketPoint {
    pub fn new(t: f64, maturity: f64, x: f64, y: f64, z: f64, k: f64, beta: f64) -> Result<Self> {
        let p = Self { t, maturity, x, y, z, k, beta };
        p.validate()?;
        Ok(p)
    }

    /// Point at `t = 0` with maturity `tau` and log-moneyness `lam = k - z`.
    pub fn at(tau: f64, x: f64, y: f64, z: f64, lam: f64, beta: f64) -> Result<Self> {
        Self::new(0.0, tau, x, y, z, z + lam, beta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.maturity > self.t) {
            return Err(Error::Domain(format!("maturity {} must exceed t {}", self.maturity, self.t)));
        }
        if self.beta == 0.0 || !self.beta.is_finite() {
            return Err(Error::Domain("leverage ratio beta must be nonzero".into()));
        }
        check_beta(self.beta);
        Ok(())
    }

    pub fn tau(&self) -> f64 {
        self.maturity - self.t
    }

    pub fn lam(&self) -> f64 {
        self.k - self.z
    }

    pub fn with_lam(&self, lam: f64) -> Self {
        Self { k: self.z + lam, ..*self }
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        Self { maturity: self.t + tau, ..*self }
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        Self { beta, ..*self }
    }
}

fn check_beta(beta: f64) {
    const TYPICAL: [f64; 6] = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0];
    if !TYPICAL.contains(&beta) {
        warn!("leverage ratio {beta} outside the usual set {{-3,-2,-1,1,2,3}}");
    }
}

/// Which of the four generator coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coeff {
    A,
    B,
    C,
    F,
}

impl Coeff {
    fn name(self) -> char {
        match self {
            Coeff::A => 'a',
            Coeff::B => 'b',
            Coeff::C => 'c',
            Coeff::F => 'f',
        }
    }
}

/// Scaled Taylor coefficients `χ_{i,j}` for `i + j ≤ order`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorTable<S = f64> {
    order: usize,
    expansion_point: (f64, f64),
    entries: [Vec<S>; 4],
}

fn tri_index(i: usize, j: usize) -> usize {
    let n = i + j;
    n * (n + 1) / 2 + j
}

impl<S: Scalar> TaylorTable<S> {
    pub fn zeros(order: usize, expansion_point: (f64, f64)) -> Self {
        let len = tri_index(0, order) + 1;
        let col = vec![S::zero(); len];
        Self { order, expansion_point, entries: [col.clone(), col.clone(), col.clone(), col] }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn expansion_point(&self) -> (f64, f64) {
        self.expansion_point
    }

    fn slot(which: Coeff) -> usize {
        match which {
            Coeff::A => 0,
            Coeff::B => 1,
            Coeff::C => 2,
            Coeff::F => 3,
        }
    }

    pub fn get(&self, which: Coeff, i: usize, j: usize) -> Result<&S> {
        if i + j > self.order {
            return Err(Error::MissingCoefficient { name: which.name(), i, j });
        }
        Ok(&self.entries[Self::slot(which)][tri_index(i, j)])
    }

    pub fn set(&mut self, which: Coeff, i: usize, j: usize, value: S) -> Result<()> {
        if i + j > self.order {
            return Err(Error::MissingCoefficient { name: which.name(), i, j });
        }
        self.entries[Self::slot(which)][tri_index(i, j)] = value;
        Ok(())
    }

    pub fn with(mut self, which: Coeff, i: usize, j: usize, value: S) -> Self {
        self.set(which, i, j, value).expect("index within table order");
        self
    }

    pub fn a(&self, i: usize, j: usize) -> Result<&S> {
        self.get(Coeff::A, i, j)
    }

    pub fn b(&self, i: usize, j: usize) -> Result<&S> {
        self.get(Coeff::B, i, j)
    }

    pub fn c(&self, i: usize, j: usize) -> Result<&S> {
        self.get(Coeff::C, i, j)
    }

    pub fn f(&self, i: usize, j: usize) -> Result<&S> {
        self.get(Coeff::F, i, j)
    }

    /// Instantaneous variance at the expansion point must be positive.
    pub fn validate(&self) -> Result<()> {
        let a00 = self.a(0, 0)?.to_f64();
        if !(a00 > 0.0) {
            return Err(Error::Domain(format!("a_00 must be positive, got {a00}")));
        }
        Ok(())
    }

    /// Truncated copy of lower order.
    pub fn truncate(&self, order: usize) -> Self {
        let mut out = Self::zeros(order.min(self.order), self.expansion_point);
        for n in 0..=out.order {
            for j in 0..=n {
                for which in [Coeff::A, Coeff::B, Coeff::C, Coeff::F] {
                    let v = self.get(which, n - j, j).expect("in range").clone();
                    out.set(which, n - j, j, v).expect("in range");
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    pub kappa: f64,
    pub theta: f64,
    pub delta: f64,
    pub rho: f64,
}

/// One of the supported ETF models.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    /// `dS = δ S^{γ-1} S dW`.
    Cev { delta: f64, gamma: f64 },
    /// Heston in log-variance `Y = log V`.
    Heston(HestonParams),
    /// SABR in `Y = log V`, `dV = δ V dW^y`.
    Sabr { delta: f64, gamma: f64, rho: f64 },
    /// A user-provided Taylor table at a fixed expansion point.
    CustomTable(TaylorTable<f64>),
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind_name())
    }
}

/// Values of `(a, b, c, f)` at a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub f: f64,
}

impl ModelSpec {
    pub fn cev(delta: f64, gamma: f64) -> Result<Self> {
        let m = ModelSpec::Cev { delta, gamma };
        m.validate()?;
        Ok(m)
    }

    pub fn heston(kappa: f64, theta: f64, delta: f64, rho: f64) -> Result<Self> {
        let m = ModelSpec::Heston(HestonParams { kappa, theta, delta, rho });
        m.validate()?;
        Ok(m)
    }

    pub fn sabr(delta: f64, gamma: f64, rho: f64) -> Result<Self> {
        let m = ModelSpec::Sabr { delta, gamma, rho };
        m.validate()?;
        Ok(m)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelSpec::Cev { .. } => "cev",
            ModelSpec::Heston(_) => "heston",
            ModelSpec::Sabr { .. } => "sabr",
            ModelSpec::CustomTable(_) => "custom",
        }
    }

    /// Checks the parameter restrictions of each model.
    ///
    /// Heston accepts `δ = 0` (deterministic variance), which Monte Carlo
    /// handles; the Fourier pricer requires `δ > 0`.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Domain(msg.to_string()));
        match *self {
            ModelSpec::Cev { delta, gamma } => {
                if !(delta > 0.0) {
                    return bad("CEV delta must be positive");
                }
                if !(gamma <= 1.0) {
                    return bad("CEV gamma must be <= 1");
                }
            }
            ModelSpec::Heston(HestonParams { kappa, theta, delta, rho }) => {
                if !(kappa > 0.0 && theta > 0.0 && delta >= 0.0) {
                    return bad("Heston kappa, theta must be positive and delta nonnegative");
                }
                if !(rho > -1.0 && rho < 1.0) {
                    return bad("Heston rho must lie in (-1, 1)");
                }
            }
            ModelSpec::Sabr { delta, gamma, rho } => {
                if !(delta > 0.0) {
                    return bad("SABR delta must be positive");
                }
                if !(gamma <= 1.0) {
                    return bad("SABR gamma must be <= 1");
                }
                if !(rho > -1.0 && rho < 1.0) {
                    return bad("SABR rho must lie in (-1, 1)");
                }
            }
            ModelSpec::CustomTable(ref t) => t.validate()?,
        }
        Ok(())
    }

    /// `(a, b, c, f)` at `(x, y)`; custom tables evaluate their Taylor polynomial.
    pub fn coefficients(&self, x: f64, y: f64) -> Coefficients {
        match *self {
            ModelSpec::Cev { delta, gamma } => {
                Coefficients { a: 0.5 * delta * delta * (2.0 * (gamma - 1.0) * x).exp(), b: 0.0, c: 0.0, f: 0.0 }
            }
            ModelSpec::Heston(HestonParams { kappa, theta, delta, rho }) => {
                let e = (-y).exp();
                Coefficients {
                    a: 0.5 * y.exp(),
                    b: 0.5 * delta * delta * e,
                    c: (kappa * theta - 0.5 * delta * delta) * e - kappa,
                    f: rho * delta,
                }
            }
            ModelSpec::Sabr { delta, gamma, rho } => {
                let vol = (y + (gamma - 1.0) * x).exp();
                Coefficients {
                    a: 0.5 * vol * vol,
                    b: 0.5 * delta * delta,
                    c: -0.5 * delta * delta,
                    f: rho * delta * vol,
                }
            }
            ModelSpec::CustomTable(ref t) => {
                let (xb, yb) = t.expansion_point();
                let eval = |which| {
                    let mut acc = 0.0;
                    for n in 0..=t.order() {
                        for j in 0..=n {
                            let c: f64 = *t.get(which, n - j, j).expect("in range");
                            acc += c * (x - xb).powi((n - j) as i32) * (y - yb).powi(j as i32);
                        }
                    }
                    acc
                };
                Coefficients { a: eval(Coeff::A), b: eval(Coeff::B), c: eval(Coeff::C), f: eval(Coeff::F) }
            }
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Analytic Taylor table of `model` around `point = (x̄, ȳ)`.
pub fn taylor_table(model: &ModelSpec, point: (f64, f64), order: usize) -> Result<TaylorTable<f64>> {
    if order > MAX_ORDER {
        return Err(Error::UnsupportedOrder { order, reason: format!("maximum supported order is {MAX_ORDER}") });
    }
    model.validate()?;
    let (x, y) = point;
    let mut table = TaylorTable::zeros(order, point);
    match *model {
        ModelSpec::Cev { delta, gamma } => {
            let a0 = 0.5 * delta * delta * (2.0 * (gamma - 1.0) * x).exp();
            for i in 0..=order {
                table.set(Coeff::A, i, 0, a0 * (2.0 * (gamma - 1.0)).powi(i as i32) / factorial(i))?;
            }
        }
        ModelSpec::Heston(HestonParams { kappa, theta, delta, rho }) => {
            let e_pos = y.exp();
            let e_neg = (-y).exp();
            for j in 0..=order {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                let fj = factorial(j);
                table.set(Coeff::A, 0, j, 0.5 * e_pos / fj)?;
                table.set(Coeff::B, 0, j, sign * 0.5 * delta * delta * e_neg / fj)?;
                let c = sign * (kappa * theta - 0.5 * delta * delta) * e_neg / fj;
                table.set(Coeff::C, 0, j, if j == 0 { c - kappa } else { c })?;
            }
            table.set(Coeff::F, 0, 0, rho * delta)?;
        }
        ModelSpec::Sabr { delta, gamma, rho } => {
            let vol = (y + (gamma - 1.0) * x).exp();
            for n in 0..=order {
                for j in 0..=n {
                    let i = n - j;
                    let denom = factorial(i) * factorial(j);
                    let a = 0.5 * vol * vol * (2.0 * (gamma - 1.0)).powi(i as i32) * 2f64.powi(j as i32) / denom;
                    let f = rho * delta * vol * (gamma - 1.0).powi(i as i32) / denom;
                    table.set(Coeff::A, i, j, a)?;
                    table.set(Coeff::F, i, j, f)?;
                }
            }
            table.set(Coeff::B, 0, 0, 0.5 * delta * delta)?;
            table.set(Coeff::C, 0, 0, -0.5 * delta * delta)?;
        }
        ModelSpec::CustomTable(ref stored) => {
            if stored.order() < order {
                return Err(Error::UnsupportedOrder {
                    order,
                    reason: format!("custom table only has order {}", stored.order()),
                });
            }
            return Ok(stored.truncate(order));
        }
    }
    table.validate()?;
    Ok(table)
}

/// Parameters under which the LETF `Z` itself follows Heston dynamics:
/// `(κ, β²θ, |β|δ, sign(β)ρ)` together with the shifted state `y + log β²`.
pub fn heston_beta_map(params: &HestonParams, y: f64, beta: f64) -> Result<(HestonParams, f64)> {
    if beta == 0.0 || !beta.is_finite() {
        return Err(Error::Domain("leverage ratio beta must be nonzero".into()));
    }
    Ok((
        HestonParams {
            kappa: params.kappa,
            theta: beta * beta * params.theta,
            delta: beta.abs() * params.delta,
            rho: beta.signum() * params.rho,
        },
        y + (beta * beta).ln(),
    ))
}

/// Right-continuous piecewise-constant function of time.
///
/// `values[i]` applies on `[breaks[i], breaks[i+1])`; the last value extends
/// to infinity and the first extends to minus infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstant {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn constant(v: f64) -> Self {
        Self { breaks: vec![0.0], values: vec![v] }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breaks.is_empty() || breaks.len() != values.len() {
            return Err(Error::Domain("breaks and values must be nonempty and of equal length".into()));
        }
        if breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("breakpoints must be strictly increasing".into()));
        }
        Ok(Self { breaks, values })
    }

    /// Exact `∫_a^b f(s) ds`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return -self.integral(b, a);
        }
        let n = self.breaks.len();
        let mut acc = 0.0;
        for i in 0..n {
            let lo = if i == 0 { f64::NEG_INFINITY } else { self.breaks[i] };
            let hi = if i + 1 < n { self.breaks[i + 1] } else { f64::INFINITY };
            let (s, e) = (a.max(lo), b.min(hi));
            if e > s {
                acc += self.values[i] * (e - s);
            }
        }
        acc
    }

    /// Pointwise sum of two curves.
    pub fn plus(&self, other: &Self) -> Self {
        let mut breaks: Vec<f64> = self.breaks.iter().chain(other.breaks.iter()).copied().collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let values = breaks.iter().map(|&b| self.value_at(b) + other.value_at(b)).collect();
        Self { breaks, values }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.breaks.partition_point(|&b| b <= t);
        self.values[idx.saturating_sub(1)]
    }
}

/// Deterministic interest, dividend and expense rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurves {
    pub r: PiecewiseConstant,
    pub q: PiecewiseConstant,
    pub c: PiecewiseConstant,
}

impl RateCurves {
    pub fn zero() -> Self {
        Self { r: PiecewiseConstant::zero(), q: PiecewiseConstant::zero(), c: PiecewiseConstant::zero() }
    }

    pub fn constant(r: f64, q: f64, c: f64) -> Self {
        Self { r: PiecewiseConstant::constant(r), q: PiecewiseConstant::constant(q), c: PiecewiseConstant::constant(c) }
    }

    /// Discount factor `exp(-∫_t^T r)` that multiplies zero-rate prices.
    pub fn discount(&self, t: f64, maturity: f64) -> f64 {
        (-self.r.integral(t, maturity)).exp()
    }
}

/// Maps market coordinates with deterministic rates onto zero-rate coordinates:
/// `x += ∫(r - q)`, `z += ∫(r - c - βq)` over `[t, T]`.
pub fn drift_shift(point: &MarketPoint, curves: &RateCurves) -> MarketPoint {
    let (t, m) = (point.t, point.maturity);
    let r = curves.r.integral(t, m);
    let q = curves.q.integral(t, m);
    let c = curves.c.integral(t, m);
    MarketPoint { x: point.x + r - q, z: point.z + r - c - point.beta * q, ..*point }
}

/// Contents of a flat `key = value` model parameter file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: ModelSpec,
    pub beta: Option<f64>,
    pub x0: f64,
    pub y0: f64,
    pub z0: f64,
}

const MODEL_KEYS: [&str; 10] = ["kind", "delta", "gamma", "kappa", "theta", "rho", "beta", "x0", "y0", "z0"];

impl ModelFile {
    /// Parses the key-value format; `#` starts a comment, unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kind: Option<(usize, String)> = None;
        let mut nums: BTreeMap<&'static str, (usize, f64)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config { line: line_no, msg: format!("expected `key = value`, got `{line}`") })?;
            let key = key.trim();
            let value = value.trim();
            let known = MODEL_KEYS
                .iter()
                .find(|k| **k == key)
                .ok_or_else(|| Error::Config { line: line_no, msg: format!("unknown key `{key}`") })?;
            if *known == "kind" {
                if kind.is_some() {
                    return Err(Error::Config { line: line_no, msg: "duplicate key `kind`".into() });
                }
                kind = Some((line_no, value.to_ascii_lowercase()));
                continue;
            }
            let v: f64 = value.parse().map_err(|_| Error::Config {
                line: line_no,
                msg: format!("`{key}` expects a number, got `{value}`"),
            })?;
            if nums.insert(known, (line_no, v)).is_some() {
                return Err(Error::Config { line: line_no, msg: format!("duplicate key `{key}`") });
            }
        }
        let (kind_line, kind) = kind.ok_or(Error::Config { line: 0, msg: "missing key `kind`".into() })?;
        let need = |key: &str| -> Result<f64> {
            nums.get(key)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::Config { line: kind_line, msg: format!("model `{kind}` requires `{key}`") })
        };
        let allowed: &[&str] = match kind.as_str() {
            "cev" => &["delta", "gamma"],
            "heston" => &["kappa", "theta", "delta", "rho"],
            "sabr" => &["delta", "gamma", "rho"],
            other => return Err(Error::Config { line: kind_line, msg: format!("unknown model kind `{other}`") }),
        };
        for (key, (line, _)) in &nums {
            let generic = matches!(*key, "beta" | "x0" | "y0" | "z0");
            if !generic && !allowed.contains(key) {
                return Err(Error::Config { line: *line, msg: format!("key `{key}` does not apply to `{kind}`") });
            }
        }
        let model = match kind.as_str() {
            "cev" => ModelSpec::Cev { delta: need("delta")?, gamma: need("gamma")? },
            "heston" => ModelSpec::Heston(HestonParams {
                kappa: need("kappa")?,
                theta: need("theta")?,
                delta: need("delta")?,
                rho: need("rho")?,
            }),
            _ => ModelSpec::Sabr { delta: need("delta")?, gamma: need("gamma")?, rho: need("rho")? },
        };
        model.validate().map_err(|e| Error::Config { line: kind_line, msg: e.to_string() })?;
        let get_or = |key: &str, default: f64| nums.get(key).map(|(_, v)| *v).unwrap_or(default);
        let default_y = match model {
            ModelSpec::Heston(p) => p.theta.ln(),
            _ => 0.0,
        };
        let beta = nums.get("beta").map(|(_, v)| *v);
        if let Some((line, b)) = nums.get("beta") {
            if *b == 0.0 {
                return Err(Error::Config { line: *line, msg: "beta must be nonzero".into() });
            }
        }
        Ok(Self { model, beta, x0: get_or("x0", 0.0), y0: get_or("y0", default_y), z0: get_or("z0", 0.0) })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }
}
