//! Mechanical expansion: Taylor table → `L_n` → `χ_{n,m}` → price terms and
//! implied-vol terms.

use crate::blackscholes::{bs_price, bs_vega, hermite_coefficients, hermite_vega_ratio, BsInputs, Payoff};
use crate::error::{Error, Result};
use crate::models::{MarketPoint, TaylorTable, MAX_ORDER};
use crate::opalgebra::{build_l_n, reduce_to_z, LastFactor, ZReduction};

use super::series::{IvSeries, LamTauPoly};

/// Highest implied-vol order assembled by the engine.
pub const MAX_IV_ORDER: usize = 3;

/// Smallest time to maturity accepted when dividing by vega.
pub const MIN_TAU: f64 = 1e-8;

/// Tolerance for cancellation of negative `τ` powers, relative to the largest
/// contributing coefficient.
const CANCEL_TOL: f64 = 1e-8;

/// `σ₀ = |β| √(2 a₀₀)`.
pub fn sigma0(table: &TaylorTable<f64>, beta: f64) -> Result<f64> {
    table.validate()?;
    Ok(beta.abs() * (2.0 * table.a(0, 0)?).sqrt())
}

/// `χ_{n,m}(τ)` for `n = 1..=order`.
pub fn correction_coefficients(table: &TaylorTable<f64>, beta: f64, order: usize) -> Result<Vec<ZReduction<f64>>> {
    if order > MAX_ORDER {
        return Err(Error::UnsupportedOrder { order, reason: format!("maximum supported order is {MAX_ORDER}") });
    }
    if order > table.order() {
        return Err(Error::UnsupportedOrder { order, reason: format!("table only has order {}", table.order()) });
    }
    table.validate()?;
    (1..=order).map(|n| reduce_to_z(&build_l_n(table, n, &beta, LastFactor::APart)?)).collect()
}

fn binomial(n: u32, r: u32) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `u_n / ∂σu^BS(σ₀)` as a Laurent polynomial in `(λ, τ)`.
///
/// Uses `∂z^m(∂z² - ∂z)u / vega = (-1/s)^m H_m(w) / (τσ₀)` with
/// `s² = 2σ₀²τ` and `w = (-λ - σ₀²τ/2)/s`; parity of `H_m` makes every power of
/// `s` even.
pub fn price_term_over_vega(reduction: &ZReduction<f64>, sigma0: f64) -> LamTauPoly {
    let mut out = LamTauPoly::zero();
    let two_var = 2.0 * sigma0 * sigma0;
    for (m, chi) in reduction.chi.iter().enumerate() {
        let h = hermite_coefficients(m);
        for (mono, c) in chi.terms() {
            let p = mono.0[0] as i32;
            for (j, &hj) in h.iter().enumerate() {
                if hj == 0 {
                    continue;
                }
                let half = ((m + j) / 2) as i32;
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let front = c * sign * hj as f64 / two_var.powi(half) / sigma0;
                let j = j as u32;
                // (-λ - σ₀²τ/2)^j
                for r in 0..=j {
                    let lam_sign = if (j - r).is_multiple_of(2) { 1.0 } else { -1.0 };
                    let v = front * binomial(j, r) * lam_sign * (-0.5 * sigma0 * sigma0).powi(r as i32);
                    out.add_term(j - r, p - 1 - half + r as i32, v);
                }
            }
        }
    }
    out
}

/// `∂σ²u/∂σu = λ²/(τσ³) - τσ/4`.
pub fn vega_ratio2_poly(sigma: f64) -> LamTauPoly {
    LamTauPoly::from_terms(&[(-1, 2, 1.0 / sigma.powi(3)), (1, 0, -sigma / 4.0)])
}

/// `∂σ³u/∂σu = λ⁴/(τ²σ⁶) - (3/(τσ⁴) + 1/(2σ²))λ² + τ²σ²/16 - τ/4`.
pub fn vega_ratio3_poly(sigma: f64) -> LamTauPoly {
    LamTauPoly::from_terms(&[
        (-2, 4, 1.0 / sigma.powi(6)),
        (-1, 2, -3.0 / sigma.powi(4)),
        (0, 2, -0.5 / (sigma * sigma)),
        (2, 0, sigma * sigma / 16.0),
        (1, 0, -0.25),
    ])
}

/// Converts price terms `U_n = u_n / vega` into implied-vol terms:
/// `σ₁ = U₁`, `σ₂ = U₂ - σ₁²R₂/2`, `σ₃ = U₃ - (σ₂σ₁R₂ + σ₁³R₃/6)`.
pub fn assemble_iv(sigma0: f64, price_terms: &[LamTauPoly]) -> Result<IvSeries> {
    if price_terms.len() > MAX_IV_ORDER {
        return Err(Error::UnsupportedOrder {
            order: price_terms.len(),
            reason: format!("implied-vol terms are assembled up to order {MAX_IV_ORDER}"),
        });
    }
    let r2 = vega_ratio2_poly(sigma0);
    let r3 = vega_ratio3_poly(sigma0);
    let mut terms: Vec<LamTauPoly> = Vec::new();
    for (idx, u) in price_terms.iter().enumerate() {
        let n = idx + 1;
        let correction = match n {
            1 => LamTauPoly::zero(),
            2 => terms[0].mul(&terms[0]).mul(&r2).scale(0.5),
            _ => {
                let s1 = &terms[0];
                let s2 = &terms[1];
                s2.mul(s1).mul(&r2).add(&s1.mul(s1).mul(s1).mul(&r3).scale(1.0 / 6.0))
            }
        };
        let raw = u.sub(&correction);
        let scale = u.max_abs().max(correction.max_abs());
        terms.push(raw.drop_structural_zeros(n as u32, scale, CANCEL_TOL)?);
    }
    Ok(IvSeries { sigma0, terms })
}

/// Implied-vol series through `order ≤ 3`, symbolic in `(λ, τ)`.
pub fn iv_series_engine(point: &MarketPoint, table: &TaylorTable<f64>, order: usize) -> Result<IvSeries> {
    if order > MAX_IV_ORDER {
        return Err(Error::UnsupportedOrder {
            order,
            reason: format!("implied-vol terms are assembled up to order {MAX_IV_ORDER}"),
        });
    }
    let s0 = sigma0(table, point.beta)?;
    let reductions = correction_coefficients(table, point.beta, order)?;
    let price_terms: Vec<LamTauPoly> = reductions.iter().map(|r| price_term_over_vega(r, s0)).collect();
    assemble_iv(s0, &price_terms)
}

/// `ū_N = u₀ + u₁ + … + u_N` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceApprox {
    pub u0: f64,
    pub terms: Vec<f64>,
    pub total: f64,
}

/// Zeroth-order price: Black-Scholes at `σ₀` with the point's `(τ, z, k)`.
pub fn price_u0(point: &MarketPoint, table: &TaylorTable<f64>, payoff: Payoff) -> Result<f64> {
    let s0 = sigma0(table, point.beta)?;
    bs_price(payoff, &BsInputs::new(s0, point.tau(), point.z, point.k)?)
}

/// `ū_N`; calls and puts share correction terms since `(∂z² - ∂z)` kills the
/// parity difference `e^k - e^z`.
pub fn price_un(point: &MarketPoint, table: &TaylorTable<f64>, order: usize, payoff: Payoff) -> Result<PriceApprox> {
    let tau = point.tau();
    if tau < MIN_TAU {
        return Err(Error::Domain(format!("time to maturity {tau} below {MIN_TAU}")));
    }
    let s0 = sigma0(table, point.beta)?;
    let inputs = BsInputs::new(s0, tau, point.z, point.k)?;
    let u0 = bs_price(payoff, &inputs)?;
    let vega = bs_vega(&inputs)?;
    let mut terms = Vec::with_capacity(order);
    for red in correction_coefficients(table, point.beta, order)? {
        let mut acc = 0.0;
        for (m, chi) in red.eval(tau).into_iter().enumerate() {
            if chi != 0.0 {
                acc += chi * hermite_vega_ratio(m, &inputs)?;
            }
        }
        terms.push(vega * acc);
    }
    let total = u0 + terms.iter().sum::<f64>();
    Ok(PriceApprox { u0, terms, total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackscholes::vega_ratio;
    use crate::models::{taylor_table, Coeff, ModelSpec};

    #[test]
    fn ratio_polynomials_match_closed_forms() {
        for &(sigma, tau, lam) in &[(0.3, 0.5, 0.1), (0.8, 1.3, -0.25), (0.15, 0.05, 0.02)] {
            let i = BsInputs::new(sigma, tau, 0.0, lam).unwrap();
            assert!((vega_ratio2_poly(sigma).eval(lam, tau) - vega_ratio(2, &i).unwrap()).abs() < 1e-10);
            assert!((vega_ratio3_poly(sigma).eval(lam, tau) - vega_ratio(3, &i).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn price_terms_match_pointwise_hermite_ratios() {
        let t = taylor_table(&ModelSpec::sabr(0.5, -0.5, -0.3).unwrap(), (0.0, -1.5), 2).unwrap();
        let s0 = sigma0(&t, -2.0).unwrap();
        for red in correction_coefficients(&t, -2.0, 2).unwrap() {
            let poly = price_term_over_vega(&red, s0);
            for &(tau, lam) in &[(0.25, 0.1), (1.0, -0.3)] {
                let inputs = BsInputs::new(s0, tau, 0.2, 0.2 + lam).unwrap();
                let direct: f64 =
                    red.eval(tau).iter().enumerate().map(|(m, c)| c * hermite_vega_ratio(m, &inputs).unwrap()).sum();
                assert!(
                    (poly.eval(lam, tau) - direct).abs() < 1e-12 * direct.abs().max(1e-3),
                    "{} vs {direct}",
                    poly.eval(lam, tau)
                );
            }
        }
    }

    #[test]
    fn sigma0_and_u0() {
        let t = TaylorTable::zeros(0, (0.0, 0.0)).with(Coeff::A, 0, 0, 0.02);
        assert!((sigma0(&t, 2.0).unwrap() - 0.4).abs() < 1e-15);
        let p = MarketPoint::at(1.0, 0.0, 0.0, 0.0, 0.0, 2.0).unwrap();
        let expected = crate::blackscholes::bs_call_price(&BsInputs::new(0.4, 1.0, 0.0, 0.0).unwrap()).unwrap();
        assert_eq!(price_u0(&p, &t, Payoff::Call).unwrap(), expected);
        assert_eq!(price_u0(&p.with_beta(-2.0), &t, Payoff::Call).unwrap(), expected);
        let p = MarketPoint::at(1.0, 0.0, 0.0, 0.3, -40.0, 1.0).unwrap();
        assert!((price_u0(&p, &t, Payoff::Call).unwrap() - 0.3f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn constant_coefficients_give_flat_series() {
        let t = TaylorTable::zeros(3, (0.0, 0.0))
            .with(Coeff::A, 0, 0, 0.03)
            .with(Coeff::B, 0, 0, 0.4)
            .with(Coeff::C, 0, 0, -0.2)
            .with(Coeff::F, 0, 0, 0.1);
        let p = MarketPoint::at(0.5, 0.0, 0.0, 0.0, 0.1, -3.0).unwrap();
        let s = iv_series_engine(&p, &t, 3).unwrap();
        assert!(s.terms.iter().all(LamTauPoly::is_zero));
        let approx = price_un(&p, &t, 3, Payoff::Put).unwrap();
        assert_eq!(approx.terms, vec![0.0; 3]);
        assert_eq!(approx.total, approx.u0);
    }

    #[test]
    fn order_zero_price_is_u0() {
        let t = taylor_table(&ModelSpec::cev(0.2, -0.75).unwrap(), (0.0, 0.0), 2).unwrap();
        let p = MarketPoint::at(0.5, 0.0, 0.0, 0.0, 0.1, 2.0).unwrap();
        let a = price_un(&p, &t, 0, Payoff::Call).unwrap();
        assert_eq!(a.total, price_u0(&p, &t, Payoff::Call).unwrap());
        assert!(price_un(&p.with_tau(1e-9), &t, 1, Payoff::Call).is_err());
    }
}
