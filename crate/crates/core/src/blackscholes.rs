//! Black-Scholes pricing in log coordinates with zero rates.
//!
//! Every quantity here is written in terms of the log spot `z` and log strike
//! `k` of the option's underlier, so the call price is
//! `e^z N(d+) - e^k N(d-)` with `d± = (z - k ± σ²τ/2) / (σ√τ)`.
//!
//! The expansion layer divides every price correction by vega. Two families
//! of ratios make that division explicit:
//!
//! * [`vega_ratio`]: `∂σ^n u / ∂σ u` for `n ∈ {2, 3}`;
//! * [`hermite_vega_ratio`]: `∂z^m (∂z² - ∂z) u / ∂σ u`.
//!
//! For the second family, `(∂z² - ∂z) u = vega / (στ)` and vega is a Gaussian
//! in `z`, so `m` further z-derivatives produce the physicists' Hermite
//! polynomial of index `m`:
//!
//! ```text
//! ∂z^m (∂z² - ∂z) u / ∂σ u = (-1/√(2σ²τ))^m  H_m(w) / (τσ),
//! w = (z - k - σ²τ/2) / √(2σ²τ).
//! ```
//!
//! The index is the derivative order `m`, and `w` carries no extra factor of
//! `σ` in its denominator; both are pinned by finite-difference tests below.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest Hermite index supported by [`hermite_vega_ratio`].
pub const MAX_HERMITE_ORDER: usize = 12;

/// Standard normal CDF via the complementary error function.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Inputs of a single Black-Scholes evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsInputs {
    pub sigma: f64,
    pub tau: f64,
    pub z: f64,
    pub k: f64,
}

impl BsInputs {
    pub fn new(sigma: f64, tau: f64, z: f64, k: f64) -> Result<Self> {
        let inputs = Self { sigma, tau, z, k };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Domain(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::Domain(format!("tau must be positive, got {}", self.tau)));
        }
        if !self.z.is_finite() || self.k.is_nan() {
            return Err(Error::Domain("z and k must be real".into()));
        }
        Ok(())
    }

    fn total_sd(&self) -> f64 {
        self.sigma * self.tau.sqrt()
    }

    pub fn d_plus(&self) -> f64 {
        let sd = self.total_sd();
        (self.z - self.k) / sd + 0.5 * sd
    }

    pub fn d_minus(&self) -> f64 {
        let sd = self.total_sd();
        (self.z - self.k) / sd - 0.5 * sd
    }

    fn with_sigma(&self, sigma: f64) -> Self {
        Self { sigma, ..*self }
    }
}

/// European call on `e^Z` struck at `e^k`.
pub fn bs_call_price(input: &BsInputs) -> Result<f64> {
    input.validate()?;
    Ok(call_unchecked(input))
}

/// European put; satisfies `put = call - e^z + e^k`.
pub fn bs_put_price(input: &BsInputs) -> Result<f64> {
    input.validate()?;
    Ok(put_unchecked(input))
}

/// Option type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Payoff {
    Call,
    Put,
}

pub fn bs_price(payoff: Payoff, input: &BsInputs) -> Result<f64> {
    match payoff {
        Payoff::Call => bs_call_price(input),
        Payoff::Put => bs_put_price(input),
    }
}

pub fn bs_vega(input: &BsInputs) -> Result<f64> {
    input.validate()?;
    Ok(vega_unchecked(input))
}

fn call_unchecked(input: &BsInputs) -> f64 {
    if input.k == f64::NEG_INFINITY {
        return input.z.exp();
    }
    if input.k == f64::INFINITY {
        return 0.0;
    }
    let price = input.z.exp() * norm_cdf(input.d_plus()) - input.k.exp() * norm_cdf(input.d_minus());
    price.max(0.0)
}

fn put_unchecked(input: &BsInputs) -> f64 {
    if input.k == f64::NEG_INFINITY {
        return 0.0;
    }
    let price = input.k.exp() * norm_cdf(-input.d_minus()) - input.z.exp() * norm_cdf(-input.d_plus());
    price.max(0.0)
}

fn vega_unchecked(input: &BsInputs) -> f64 {
    input.z.exp() * norm_pdf(input.d_plus()) * input.tau.sqrt()
}

/// A validated Black-Scholes implied volatility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpliedVol {
    pub value: f64,
}

const IV_LOWER: f64 = 1e-6;
const IV_UPPER: f64 = 5.0;
const IV_UPPER_CAP: f64 = 100.0;
const IV_PRICE_TOL: f64 = 1e-12;
const IV_MAX_ITER: usize = 200;

/// Inverts [`bs_call_price`] in `σ` with a bracketed, safeguarded Newton iteration.
pub fn implied_vol(price: f64, tau: f64, z: f64, k: f64) -> Result<ImpliedVol> {
    BsInputs::new(1.0, tau, z, k)?;
    let spot = z.exp();
    let lower = (spot - k.exp()).max(0.0);
    if !(price > lower && price < spot) {
        return Err(Error::NoArbitrage { price, lower, upper: spot });
    }
    let tol = IV_PRICE_TOL * spot;
    let base = BsInputs { sigma: 1.0, tau, z, k };
    let f = |s: f64| call_unchecked(&base.with_sigma(s)) - price;

    let mut lo = IV_LOWER;
    let mut hi = IV_UPPER;
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > IV_UPPER_CAP {
            return Err(Error::SolverFailed { iterations: 0, lo, hi });
        }
    }
    if f(lo) > 0.0 {
        // price sits extremely close to intrinsic; widen downwards
        while f(lo) > 0.0 {
            hi = lo;
            lo *= 0.1;
            if lo < 1e-14 {
                return Err(Error::SolverFailed { iterations: 0, lo, hi });
            }
        }
    }

    // Start at the vega-maximising volatility when it lies in the bracket.
    let inflection = (2.0 * (z - k).abs() / tau).sqrt();
    let mut sigma = if inflection > lo && inflection < hi { inflection } else { 0.5 * (lo + hi) };
    for iteration in 0..IV_MAX_ITER {
        let input = base.with_sigma(sigma);
        let resid = call_unchecked(&input) - price;
        if resid > 0.0 {
            hi = sigma;
        } else {
            lo = sigma;
        }
        let vega = vega_unchecked(&input);
        let newton = if vega > 0.0 { sigma - resid / vega } else { f64::NAN };
        if resid.abs() <= tol {
            // one polishing step, kept only if it stays inside the bracket
            if newton.is_finite() && newton > lo && newton < hi {
                sigma = newton;
            }
            return Ok(ImpliedVol { value: sigma });
        }
        let next = if newton.is_finite() && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (hi - lo) <= 4.0 * f64::EPSILON * sigma && iteration > 0 {
            return Ok(ImpliedVol { value: next });
        }
        sigma = next;
    }
    Err(Error::SolverFailed { iterations: IV_MAX_ITER, lo, hi })
}

/// `∂σ^order u / ∂σ u` for `order ∈ {2, 3}`, with `λ = k - z`.
///
/// Order 3 is `λ⁴/(τ²σ⁶) - (3/(τσ⁴) + 1/(2σ²)) λ² + τ²σ²/16 - τ/4`; the sign
/// on the `1/(2σ²)` term is the one that agrees with finite differences.
pub fn vega_ratio(order: usize, input: &BsInputs) -> Result<f64> {
    input.validate()?;
    let BsInputs { sigma, tau, z, k } = *input;
    let lam = k - z;
    let lam2 = lam * lam;
    match order {
        2 => Ok(lam2 / (tau * sigma.powi(3)) - tau * sigma / 4.0),
        3 => Ok(lam2 * lam2 / (tau * tau * sigma.powi(6))
            - (3.0 / (tau * sigma.powi(4)) + 1.0 / (2.0 * sigma * sigma)) * lam2
            + tau * tau * sigma * sigma / 16.0
            - tau / 4.0),
        _ => Err(Error::UnsupportedOrder { order, reason: "vega ratios exist for orders 2 and 3".into() }),
    }
}

/// Physicists' Hermite polynomial `H_n(w)` by three-term recurrence.
pub fn hermite(n: usize, w: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 2.0 * w;
    for i in 1..n {
        let next = 2.0 * w * cur - 2.0 * i as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Integer coefficients of `H_n`, lowest degree first.
pub fn hermite_coefficients(n: usize) -> Vec<i64> {
    let mut prev = vec![1i64];
    if n == 0 {
        return prev;
    }
    let mut cur = vec![0, 2];
    for i in 1..n {
        let mut next = vec![0i64; i + 2];
        for (j, c) in cur.iter().enumerate() {
            next[j + 1] += 2 * c;
        }
        for (j, c) in prev.iter().enumerate() {
            next[j] -= 2 * i as i64 * c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// `∂z^m (∂z² - ∂z) u / ∂σ u` for the Black-Scholes call.
pub fn hermite_vega_ratio(m: usize, input: &BsInputs) -> Result<f64> {
    input.validate()?;
    if m > MAX_HERMITE_ORDER {
        return Err(Error::UnsupportedOrder { order: m, reason: format!("Hermite index above {MAX_HERMITE_ORDER}") });
    }
    let BsInputs { sigma, tau, z, k } = *input;
    let s = (2.0 * sigma * sigma * tau).sqrt();
    let w = (z - k - 0.5 * sigma * sigma * tau) / s;
    Ok((-1.0 / s).powi(m as i32) * hermite(m, w) / (tau * sigma))
}
