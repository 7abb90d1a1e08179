//! Euler Monte Carlo for the ETF state `(X, Y)` with the LETF rebuilt
//! pathwise from `Z_T - Z_0 = β(X_T - X_0) - β(β-1)/2 ∫σ²ds`.
//!
//! One batch of ETF paths serves every leverage ratio and strike. Paths are
//! generated in fixed-size chunks, each path from its own ChaCha stream keyed
//! by `(seed, path index)`, so results do not depend on the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blackscholes::{bs_vega, implied_vol, BsInputs, Payoff};
use crate::error::{Error, Result};
use crate::models::{HestonParams, MarketPoint, ModelSpec};
use crate::scaling::{SmileCurve, SmileMeta, SmilePoint};

use super::run_with_worker_cap;

/// Paths whose spot falls to this level are absorbed.
pub const ABSORPTION_FLOOR: f64 = 1e-12;

/// Paths (or antithetic pairs) per work chunk.
const CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub paths: usize,
    pub steps_per_year: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { paths: 1_000_000, steps_per_year: 250, seed: 20_140_501, antithetic: true }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_year < 50 {
            return Err(Error::Domain(format!("steps_per_year = {} is below 50", self.steps_per_year)));
        }
        if self.antithetic && (self.paths < 2 || !self.paths.is_multiple_of(2)) {
            return Err(Error::Domain(format!(
                "antithetic sampling needs an even path count >= 2, got {}",
                self.paths
            )));
        }
        if self.paths < 2 {
            return Err(Error::Domain("at least two paths are needed for an error estimate".into()));
        }
        Ok(())
    }

    pub fn steps(&self, tau: f64) -> usize {
        ((self.steps_per_year as f64 * tau).ceil() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub price: f64,
    pub std_error: f64,
    pub half_width_95: f64,
}

impl McEstimate {
    fn from_samples(samples: impl Iterator<Item = f64>) -> Self {
        let (mut n, mut sum, mut sum_sq) = (0usize, 0.0, 0.0);
        for s in samples {
            n += 1;
            sum += s;
            sum_sq += s * s;
        }
        let mean = sum / n as f64;
        let var = ((sum_sq - n as f64 * mean * mean) / (n as f64 - 1.0)).max(0.0);
        let std_error = (var / n as f64).sqrt();
        Self { price: mean, std_error, half_width_95: 1.96 * std_error }
    }
}

/// Terminal ETF state of one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEnd {
    pub x: f64,
    /// `∫σ² ds` accumulated with the same left-point rule as the drift of `X`.
    pub int_var: f64,
    pub absorbed: bool,
}

/// A batch of simulated ETF paths.
#[derive(Debug, Clone)]
pub struct McPaths {
    pub x0: f64,
    pub tau: f64,
    pub antithetic: bool,
    pub ends: Vec<PathEnd>,
}

impl McPaths {
    /// `Z_T` for leverage `beta` started at `z0`; absorbed paths end at `-∞`.
    pub fn z_terminal(&self, end: &PathEnd, z0: f64, beta: f64) -> f64 {
        if end.absorbed {
            f64::NEG_INFINITY
        } else {
            z0 + beta * (end.x - self.x0) - 0.5 * beta * (beta - 1.0) * end.int_var
        }
    }

    /// Mean of `f` over paths; antithetic partners are averaged before the
    /// error estimate.
    pub fn estimate(&self, f: impl Fn(&PathEnd) -> f64) -> McEstimate {
        if self.antithetic {
            McEstimate::from_samples(self.ends.chunks_exact(2).map(|p| 0.5 * (f(&p[0]) + f(&p[1]))))
        } else {
            McEstimate::from_samples(self.ends.iter().map(f))
        }
    }

    pub fn absorbed(&self) -> usize {
        self.ends.iter().filter(|e| e.absorbed).count()
    }

    /// Option on `e^{Z_T}` with log strike `k`.
    pub fn option(&self, z0: f64, beta: f64, k: f64, payoff: Payoff) -> McEstimate {
        let strike = k.exp();
        self.estimate(|e| {
            let s = self.z_terminal(e, z0, beta).exp();
            match payoff {
                Payoff::Call => (s - strike).max(0.0),
                Payoff::Put => (strike - s).max(0.0),
            }
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum Dynamics {
    Cev { delta: f64, g: f64 },
    Sabr { delta: f64, g: f64, rho: f64 },
    Heston(HestonParams),
}

impl Dynamics {
    fn of(model: &ModelSpec) -> Result<Self> {
        model.validate()?;
        Ok(match *model {
            ModelSpec::Cev { delta, gamma } => Dynamics::Cev { delta, g: gamma - 1.0 },
            ModelSpec::Sabr { delta, gamma, rho } => Dynamics::Sabr { delta, g: gamma - 1.0, rho },
            ModelSpec::Heston(p) => Dynamics::Heston(p),
            ModelSpec::CustomTable(_) => {
                return Err(Error::Domain("Monte Carlo needs a parametric model, not a Taylor table".into()))
            }
        })
    }

    /// Second state variable in simulation coordinates (Heston runs on `V = e^y`).
    fn initial_aux(&self, y: f64) -> f64 {
        match self {
            Dynamics::Heston(_) => y.exp(),
            _ => y,
        }
    }

    fn needs_second_normal(&self) -> bool {
        !matches!(self, Dynamics::Cev { .. })
    }

    /// Instantaneous variance `σ² = 2a`.
    fn variance(&self, x: f64, aux: f64) -> f64 {
        match *self {
            Dynamics::Cev { delta, g } => delta * delta * (2.0 * g * x).exp(),
            Dynamics::Sabr { g, .. } => (2.0 * (aux + g * x)).exp(),
            Dynamics::Heston(_) => aux.max(0.0),
        }
    }

    fn step_aux(&self, aux: f64, var: f64, z1: f64, z2: f64, dt: f64, sq: f64) -> f64 {
        match *self {
            Dynamics::Cev { .. } => aux,
            Dynamics::Sabr { delta, rho, .. } => {
                aux - 0.5 * delta * delta * dt + delta * sq * (rho * z1 + (1.0 - rho * rho).sqrt() * z2)
            }
            // full truncation
            Dynamics::Heston(HestonParams { kappa, theta, delta, rho }) => {
                aux + kappa * (theta - var) * dt
                    + delta * (var * dt).sqrt() * (rho * z1 + (1.0 - rho * rho).sqrt() * z2)
            }
        }
    }

    fn can_absorb(&self) -> bool {
        !matches!(self, Dynamics::Heston(_))
    }
}

/// One path (or antithetic pair) from its own RNG stream. When `direct_z` is
/// given, `Z` is also stepped with its own SDE from the same increments.
#[allow(clippy::too_many_arguments)]
fn simulate_unit(
    dyn_: &Dynamics,
    x0: f64,
    aux0: f64,
    steps: usize,
    dt: f64,
    antithetic: bool,
    rng: &mut ChaCha8Rng,
    direct_z: Option<(f64, f64)>,
) -> ([PathEnd; 2], [f64; 2]) {
    let sq = dt.sqrt();
    let floor = ABSORPTION_FLOOR.ln();
    let n = if antithetic { 2 } else { 1 };
    let mut x = [x0; 2];
    let mut aux = [aux0; 2];
    let mut iv = [0.0; 2];
    let mut absorbed = [false; 2];
    let (z0, beta) = direct_z.unwrap_or((0.0, 1.0));
    let mut z = [z0; 2];
    let second = dyn_.needs_second_normal();
    for _ in 0..steps {
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = if second { StandardNormal.sample(rng) } else { 0.0 };
        for j in 0..n {
            if absorbed[j] {
                continue;
            }
            let sign = if j == 0 { 1.0 } else { -1.0 };
            let (e1, e2) = (sign * z1, sign * z2);
            let var = dyn_.variance(x[j], aux[j]);
            let vol = var.sqrt();
            let nx = x[j] - 0.5 * var * dt + vol * sq * e1;
            if direct_z.is_some() {
                z[j] += -0.5 * beta * beta * var * dt + beta * vol * sq * e1;
            }
            aux[j] = dyn_.step_aux(aux[j], var, e1, e2, dt, sq);
            iv[j] += var * dt;
            x[j] = nx;
            if dyn_.can_absorb() && (!(nx > floor) || !nx.is_finite()) {
                absorbed[j] = true;
                x[j] = floor;
            }
        }
    }
    let end = |j: usize| PathEnd { x: x[j], int_var: iv[j], absorbed: absorbed[j] };
    ([end(0), end(1)], z)
}

fn unit_rng(seed: u64, unit: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(unit as u64);
    rng
}

/// Simulates ETF paths over `τ = point.tau()` from `(point.x, point.y)`.
pub fn simulate_paths(model: &ModelSpec, point: &MarketPoint, cfg: &McConfig) -> Result<McPaths> {
    cfg.validate()?;
    point.validate()?;
    let dyn_ = Dynamics::of(model)?;
    let tau = point.tau();
    let steps = cfg.steps(tau);
    let dt = tau / steps as f64;
    let units = if cfg.antithetic { cfg.paths / 2 } else { cfg.paths };
    let chunks = units.div_ceil(CHUNK);
    let aux0 = dyn_.initial_aux(point.y);
    let x0 = point.x;
    let per_chunk: Vec<Vec<PathEnd>> = run_with_worker_cap(|| {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut out = Vec::with_capacity(2 * CHUNK);
                for unit in c * CHUNK..((c + 1) * CHUNK).min(units) {
                    let mut rng = unit_rng(cfg.seed, unit);
                    let (ends, _) = simulate_unit(&dyn_, x0, aux0, steps, dt, cfg.antithetic, &mut rng, None);
                    out.push(ends[0]);
                    if cfg.antithetic {
                        out.push(ends[1]);
                    }
                }
                out
            })
            .collect()
    })?;
    let ends: Vec<PathEnd> = per_chunk.into_iter().flatten().collect();
    if ends.iter().any(|e| !e.absorbed && !(e.x.is_finite() && e.int_var.is_finite())) {
        return Err(Error::Numerical("non-finite terminal state on an unabsorbed path".into()));
    }
    Ok(McPaths { x0, tau, antithetic: cfg.antithetic, ends })
}

/// Price of a call or put on the LETF at `point`.
pub fn mc_simulate(model: &ModelSpec, point: &MarketPoint, cfg: &McConfig, payoff: Payoff) -> Result<McEstimate> {
    let paths = simulate_paths(model, point, cfg)?;
    Ok(paths.option(point.z, point.beta, point.k, payoff))
}

/// Implied-vol smile on `lams` from one batch of paths (common random numbers).
///
/// Each strike is priced with the out-of-the-money option and converted to a
/// call by parity. Strikes whose confidence interval reaches a no-arbitrage
/// bound, or whose price cannot be inverted, are listed in
/// [`SmileCurve::excluded`].
pub fn smile_from_paths(paths: &McPaths, model_name: &str, z0: f64, beta: f64, lams: &[f64]) -> Result<SmileCurve> {
    let tau = paths.tau;
    let mut pts = Vec::new();
    let mut excluded = Vec::new();
    for &lam in lams {
        let k = z0 + lam;
        let payoff = if lam < 0.0 { Payoff::Put } else { Payoff::Call };
        let est = paths.option(z0, beta, k, payoff);
        let (spot, strike) = (z0.exp(), k.exp());
        // bounds on the out-of-the-money price
        let upper = match payoff {
            Payoff::Call => spot,
            Payoff::Put => strike,
        };
        if est.price - est.half_width_95 <= 0.0 || est.price + est.half_width_95 >= upper {
            excluded.push(lam);
            continue;
        }
        let call = match payoff {
            Payoff::Call => est.price,
            Payoff::Put => est.price + spot - strike,
        };
        let iv = match implied_vol(call, tau, z0, k) {
            Ok(v) => v.value,
            Err(_) => {
                excluded.push(lam);
                continue;
            }
        };
        let vega = bs_vega(&BsInputs::new(iv, tau, z0, k)?)?;
        pts.push(SmilePoint {
            lam,
            iv,
            iv_half_width: Some(est.half_width_95 / vega),
            price: Some(call),
            price_se: Some(est.std_error),
        });
    }
    let meta = SmileMeta { model: model_name.to_string(), beta, tau, method: "mc".into() };
    let mut curve = SmileCurve::new(pts, meta)?;
    curve.excluded = excluded;
    Ok(curve)
}

/// Simulates and builds the LETF smile at `point.beta`.
pub fn mc_implied_smile(model: &ModelSpec, point: &MarketPoint, lams: &[f64], cfg: &McConfig) -> Result<SmileCurve> {
    let paths = simulate_paths(model, point, cfg)?;
    smile_from_paths(&paths, model.kind_name(), point.z, point.beta, lams)
}

/// Largest `|Z_T^direct - Z_T^rebuilt|` over `paths` single paths, where the
/// direct value steps `dZ = -β²σ²/2 dt + βσ dW` with the same increments.
pub fn pathwise_z_gap(
    model: &ModelSpec,
    point: &MarketPoint,
    paths: usize,
    steps_per_year: usize,
    seed: u64,
) -> Result<f64> {
    point.validate()?;
    let dyn_ = Dynamics::of(model)?;
    let tau = point.tau();
    let steps = ((steps_per_year as f64 * tau).ceil() as usize).max(1);
    let dt = tau / steps as f64;
    let aux0 = dyn_.initial_aux(point.y);
    let batch = McPaths { x0: point.x, tau, antithetic: false, ends: Vec::new() };
    let gaps: Vec<f64> = run_with_worker_cap(|| {
        (0..paths)
            .into_par_iter()
            .map(|unit| {
                let mut rng = unit_rng(seed, unit);
                let (ends, z) =
                    simulate_unit(&dyn_, point.x, aux0, steps, dt, false, &mut rng, Some((point.z, point.beta)));
                if ends[0].absorbed {
                    0.0
                } else {
                    (z[0] - batch.z_terminal(&ends[0], point.z, point.beta)).abs()
                }
            })
            .collect()
    })?;
    Ok(gaps.into_iter().fold(0.0, f64::max))
}
