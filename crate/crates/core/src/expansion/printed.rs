//! Closed-form implied-vol terms for a time-homogeneous LSV table and for
//! the CEV, Heston and SABR models, written out by hand as an independent
//! check on the mechanical engine.

use crate::error::{Error, Result};
use crate::models::{HestonParams, MarketPoint, ModelSpec, TaylorTable};

use super::series::{IvSeries, LamTauPoly};

fn poly(terms: &[(i32, u32, f64)]) -> LamTauPoly {
    LamTauPoly::from_terms(terms)
}

/// General table, orders up to 2.
pub fn iv_series_general(table: &TaylorTable<f64>, beta: f64, order: usize) -> Result<IvSeries> {
    if order > 2 {
        return Err(Error::UnsupportedOrder { order, reason: "closed form available up to order 2".into() });
    }
    if order > table.order() {
        return Err(Error::UnsupportedOrder { order, reason: format!("table only has order {}", table.order()) });
    }
    table.validate()?;
    let g = |f: fn(&TaylorTable<f64>, usize, usize) -> Result<&f64>, i: usize, j: usize| -> f64 {
        f(table, i, j).copied().unwrap_or(0.0)
    };
    let a = |i, j| g(TaylorTable::a, i, j);
    let b = |i, j| g(TaylorTable::b, i, j);
    let c = |i, j| g(TaylorTable::c, i, j);
    let f = |i, j| g(TaylorTable::f, i, j);
    let bt = beta;
    let s0 = bt.abs() * (2.0 * a(0, 0)).sqrt();
    let mut terms = Vec::new();
    if order >= 1 {
        let s10 = poly(&[(1, 0, (bt - 1.0) * s0 * a(1, 0) / 4.0), (0, 1, bt * a(1, 0) / (2.0 * s0))]);
        let s01 = poly(&[
            (1, 0, bt * bt * a(0, 1) * (2.0 * c(0, 0) + bt * f(0, 0)) / (4.0 * s0)),
            (0, 1, bt.powi(3) * a(0, 1) * f(0, 0) / (2.0 * s0.powi(3))),
        ]);
        terms.push(s10.add(&s01));
    }
    if order >= 2 {
        // second-order coefficients enter as n! times the Taylor coefficient
        let (a10, a01, a20, a11, a02) = (a(1, 0), a(0, 1), 2.0 * a(2, 0), 2.0 * a(1, 1), 2.0 * a(0, 2));
        let (b00, c00, c10, c01) = (b(0, 0), c(0, 0), c(1, 0), c(0, 1));
        let (f00, f10, f01) = (f(0, 0), f(1, 0), f(0, 1));
        let s2 = s0 * s0;
        let b2 = bt * bt;
        let s20 = poly(&[
            (1, 0, (2.0 * s2 * a20 - 3.0 * b2 * a10 * a10) / (24.0 * s0)),
            (
                2,
                0,
                (b2 * (2.0 * bt * (2.0 * bt - 5.0) + 5.0) * s0 * a10 * a10
                    + 4.0 * (bt - 1.0).powi(2) * s0.powi(3) * a20)
                    / (96.0 * b2),
            ),
            (1, 1, -(bt - 1.0) * (b2 * a10 * a10 - 4.0 * s2 * a20) / (24.0 * bt * s0)),
            (0, 2, (2.0 * s2 * a20 - 3.0 * b2 * a10 * a10) / (12.0 * s0.powi(3))),
        ]);
        let s11 = poly(&[
            (1, 0, b2 * (a01 * (b2 * a10 * f00 - 2.0 * s2 * f10) + s2 * a11 * f00) / (12.0 * s0.powi(3))),
            (
                2,
                0,
                (a01 * (b2 * a10 * (2.0 * (bt - 1.0) * c00 - bt * f00)
                    + 2.0 * (bt - 1.0) * s2 * (2.0 * c10 + bt * f10))
                    + 2.0 * (bt - 1.0) * s2 * a11 * (2.0 * c00 + bt * f00))
                    / (48.0 * s0),
            ),
            (
                1,
                1,
                bt * (a01
                    * (5.0 * b2 * a10 * ((1.0 - 2.0 * bt) * f00 - 2.0 * c00)
                        + 2.0 * s2 * (2.0 * c10 + (2.0 * bt - 1.0) * f10))
                    + 2.0 * s2 * a11 * (2.0 * c00 + (2.0 * bt - 1.0) * f00))
                    / (24.0 * s0.powi(3)),
            ),
            (0, 2, b2 * (a01 * (s2 * f10 - 5.0 * b2 * a10 * f00) + s2 * a11 * f00) / (6.0 * s0.powi(5))),
        ]);
        let m = 2.0 * c00 + bt * f00;
        let q = 2.0 * a01 * a01 * b00 + a01 * f00 * f01 + a02 * f00 * f00;
        let s02 = poly(&[
            (
                1,
                0,
                (12.0 * b2 * s2 * s2 * a02 * b00 - 4.0 * b2 * b2 * s2 * q + 9.0 * b2.powi(3) * a01 * a01 * f00 * f00)
                    / (24.0 * s0.powi(5)),
            ),
            (
                2,
                0,
                b2 * (s2 * (-2.0 * b2 * a01 * a01 * b00 + a01 * m * (2.0 * c01 + bt * f01) + a02 * m * m)
                    - 3.0 * b2 * a01 * a01 * c00 * (c00 + bt * f00))
                    / (24.0 * s0.powi(3)),
            ),
            (
                1,
                1,
                bt.powi(3)
                    * (-9.0 * b2 * a01 * a01 * f00 * m
                        + 4.0 * s2 * a02 * f00 * m
                        + 4.0 * s2 * a01 * (f01 * (c00 + bt * f00) + c01 * f00))
                    / (24.0 * s0.powi(5)),
            ),
            (0, 2, b2 * b2 * (2.0 * s2 * q - 9.0 * b2 * a01 * a01 * f00 * f00) / (12.0 * s0.powi(7))),
        ]);
        terms.push(s20.add(&s11).add(&s02));
    }
    Ok(IvSeries { sigma0: s0, terms })
}

/// CEV `σ₀ … σ₃`.
pub fn iv_series_cev(delta: f64, gamma: f64, x: f64, beta: f64, order: usize) -> Result<IvSeries> {
    if order > 3 {
        return Err(Error::UnsupportedOrder { order, reason: "closed form available up to order 3".into() });
    }
    let bt = beta;
    let g = gamma - 1.0;
    let s0 = bt.abs() * ((2.0 * x * g).exp() * delta * delta).sqrt();
    let all = [
        poly(&[(1, 0, (bt - 1.0) * g * s0.powi(3) / (4.0 * bt * bt)), (0, 1, g * s0 / (2.0 * bt))]),
        cev_sigma2(g, s0, bt),
        poly(&[
            (2, 0, 5.0 * (bt - 1.0) * g.powi(3) * s0.powi(5) / (32.0 * bt.powi(4))),
            (3, 0, (bt - 1.0) * (26.0 * bt * bt - 70.0 * bt + 35.0) * g.powi(3) * s0.powi(7) / (384.0 * bt.powi(6))),
            (1, 1, g.powi(3) * s0.powi(3) / (16.0 * bt.powi(3))),
            (2, 1, 5.0 * (2.0 * bt * (4.0 * bt - 9.0) + 9.0) * g.powi(3) * s0.powi(5) / (192.0 * bt.powi(5))),
            (1, 2, 7.0 * (bt - 1.0) * g.powi(3) * s0.powi(3) / (48.0 * bt.powi(4))),
        ]),
    ];
    Ok(IvSeries { sigma0: s0, terms: all[..order].to_vec() })
}

/// `σ₂` shared by CEV and the `x`-part of SABR.
fn cev_sigma2(g: f64, s0: f64, bt: f64) -> LamTauPoly {
    poly(&[
        (1, 0, g * g * s0.powi(3) / (24.0 * bt * bt)),
        (2, 0, (2.0 * bt * (6.0 * bt - 13.0) + 13.0) * g * g * s0.powi(5) / (96.0 * bt.powi(4))),
        (1, 1, 7.0 * (bt - 1.0) * g * g * s0.powi(3) / (24.0 * bt.powi(3))),
        (0, 2, g * g * s0 / (12.0 * bt * bt)),
    ])
}

/// Heston `σ₀ … σ₃` with the expansion point at the current state.
pub fn iv_series_heston(p: &HestonParams, y: f64, beta: f64, order: usize) -> Result<IvSeries> {
    if order > 3 {
        return Err(Error::UnsupportedOrder { order, reason: "closed form available up to order 3".into() });
    }
    let HestonParams { kappa: k, theta: th, delta: d, rho: r } = *p;
    let bt = beta;
    let s0 = bt.abs() * y.exp().sqrt();
    let s2 = s0 * s0;
    let e = d * d - 2.0 * th * k;
    let h = bt * d * r - 2.0 * k;
    let sigma1 = poly(&[(1, 0, (s2 * h - bt * bt * e) / (8.0 * s0)), (0, 1, bt * d * r / (4.0 * s0))]);
    let sigma2 = poly(&[
        (1, 0, bt * bt * d * d * (r * r + 8.0) / (96.0 * s0)),
        (
            2,
            0,
            (-3.0 * bt.powi(4) * e * e - 2.0 * bt * bt * s2 * e * h
                + 4.0 * s2 * s2 * (bt * d * (bt * d * (2.0 * r * r - 1.0) - 5.0 * k * r) + 5.0 * k * k))
                / (384.0 * s0.powi(3)),
        ),
        (1, 1, bt * d * r * (5.0 * bt * bt * e + s2 * (2.0 * k - bt * d * r)) / (96.0 * s0.powi(3))),
        (0, 2, bt * bt * d * d * (2.0 - 5.0 * r * r) / (48.0 * s0.powi(3))),
    ]);
    let sigma3 = poly(&[
        (2, 0, bt * bt * d * d * (bt * bt * (5.0 * r * r + 4.0) * e + 3.0 * r * r * s2 * h) / (768.0 * s0.powi(3))),
        (
            3,
            0,
            (-3.0 * bt.powi(6) * e.powi(3)
                + bt.powi(4) * s2 * e * e * h
                + 4.0 * bt * bt * k * s2 * s2 * e * (bt * d * r - k)
                + 2.0 * s2.powi(3) * h * (bt * d * (bt * d * (5.0 * r * r - 6.0) - 6.0 * k * r) + 6.0 * k * k))
                / (3072.0 * s0.powi(5)),
        ),
        (1, 1, -bt.powi(3) * d.powi(3) * r * (9.0 * r * r + 8.0) / (384.0 * s0.powi(3))),
        (
            2,
            1,
            bt * d
                * r
                * (21.0 * bt.powi(4) * e * e - 10.0 * bt * bt * s2 * e * h
                    + 4.0 * s2 * s2 * (bt * d * (bt * (d - 2.0 * d * r * r) + 3.0 * k * r) - 3.0 * k * k))
                / (1536.0 * s0.powi(5)),
        ),
        (
            1,
            2,
            -bt * bt * d * d * (bt * bt * (23.0 * r * r - 8.0) * e + (7.0 * r * r - 2.0) * s2 * (2.0 * k - bt * d * r))
                / (384.0 * s0.powi(5)),
        ),
        (0, 3, bt.powi(3) * d.powi(3) * r * (8.0 * r * r - 5.0) / (96.0 * s0.powi(5))),
    ]);
    let all = [sigma1, sigma2, sigma3];
    Ok(IvSeries { sigma0: s0, terms: all[..order].to_vec() })
}

/// SABR `σ₀ … σ₂`; the third-order term is not available in closed form here.
pub fn iv_series_sabr(delta: f64, gamma: f64, rho: f64, x: f64, y: f64, beta: f64, order: usize) -> Result<IvSeries> {
    if order > 2 {
        return Err(Error::UnsupportedOrder { order, reason: "SABR third-order closed form is not printed".into() });
    }
    let bt = beta;
    let (d, r, g) = (delta, rho, gamma - 1.0);
    let sg = bt.signum();
    let ab = bt.abs();
    let s0 = ab * (y + g * x).exp();
    let s2 = s0 * s0;
    let s10 = poly(&[(1, 0, (bt - 1.0) * g * s0.powi(3) / (4.0 * bt * bt)), (0, 1, g * s0 / (2.0 * bt))]);
    let s01 = poly(&[(1, 0, -0.25 * d * s0 * (d - r * s0 * sg)), (0, 1, 0.5 * d * r * sg)]);
    let s20 = cev_sigma2(g, s0, bt);
    let s11 = poly(&[
        (1, 0, g * d * r * s2 / (4.0 * ab)),
        (
            2,
            0,
            g * d * s0.powi(3) * (bt * (10.0 * bt - 11.0) * r * s0 - 9.0 * (bt - 1.0) * d * ab) / (48.0 * ab.powi(3)),
        ),
        (1, 1, g * d * s0 * (5.0 * (2.0 * bt - 1.0) * r * s0 - 3.0 * d * ab) / (24.0 * bt * ab)),
    ]);
    let s02 = poly(&[
        (1, 0, d * d * (8.0 - 3.0 * r * r) * s0 / 24.0),
        (2, 0, d * d * s0 * (5.0 * d * d + 4.0 * (3.0 * r * r - 1.0) * s2 - 14.0 * d * r * s0 / sg) / 96.0),
        (1, 1, -d * d * r * (d - 3.0 * r * s0 * sg) / (24.0 * sg)),
        (0, 2, d * d * (2.0 - 3.0 * r * r) / (12.0 * s0)),
    ]);
    let all = [s10.add(&s01), s20.add(&s11).add(&s02)];
    Ok(IvSeries { sigma0: s0, terms: all[..order].to_vec() })
}

/// Closed-form series for a model at a point.
pub fn iv_series_printed(model: &ModelSpec, point: &MarketPoint, order: usize) -> Result<IvSeries> {
    point.validate()?;
    model.validate()?;
    match model {
        ModelSpec::Cev { delta, gamma } => iv_series_cev(*delta, *gamma, point.x, point.beta, order),
        ModelSpec::Heston(p) => iv_series_heston(p, point.y, point.beta, order),
        ModelSpec::Sabr { delta, gamma, rho } => {
            iv_series_sabr(*delta, *gamma, *rho, point.x, point.y, point.beta, order)
        }
        ModelSpec::CustomTable(t) => iv_series_general(t, point.beta, order),
    }
}
