//! Price and implied-vol expansions.
//!
//! Two independent routes produce the same [`IvSeries`]: the mechanical
//! [`engine`] (operator algebra) and the hand-written closed forms in
//! [`printed`]. They are used as oracles for each other.

pub mod engine;
pub mod printed;
mod series;

pub use engine::{
    assemble_iv, correction_coefficients, iv_series_engine, price_term_over_vega, price_u0, price_un, sigma0,
    PriceApprox, MAX_IV_ORDER, MIN_TAU,
};
pub use printed::{iv_series_cev, iv_series_general, iv_series_heston, iv_series_printed, iv_series_sabr};
pub use series::{IvSeries, LamTauPoly};

use crate::error::Result;
use crate::models::{taylor_table, MarketPoint, ModelSpec};

/// Which route builds the series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Engine,
    Printed,
}

/// Implied-vol series of `model` at `point` through `order`.
pub fn iv_series(point: &MarketPoint, model: &ModelSpec, order: usize, method: Method) -> Result<IvSeries> {
    match method {
        Method::Engine => {
            let table = taylor_table(model, (point.x, point.y), order)?;
            iv_series_engine(point, &table, order)
        }
        Method::Printed => iv_series_printed(model, point, order),
    }
}

/// `σ₀ + σ₁ + … + σ_order` at the point's `(λ, τ)`.
pub fn iv_approx(point: &MarketPoint, model: &ModelSpec, order: usize, method: Method) -> Result<f64> {
    Ok(iv_series(point, model, order, method)?.eval(point.lam(), point.tau()))
}
