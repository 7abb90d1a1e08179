//! Heston characteristic function and Fourier pricing along a shifted contour.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::blackscholes::{implied_vol, Payoff};
use crate::error::{Error, Result};
use crate::models::{heston_beta_map, HestonParams, MarketPoint};
use crate::scaling::{SmileCurve, SmileMeta, SmilePoint};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Contour and quadrature settings for [`heston_fourier_price`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierConfig {
    /// Imaginary part of the integration contour; must be below -1.
    pub xi_imag: f64,
    /// The real part is integrated over `[-truncation, truncation]`.
    pub truncation: f64,
    /// Total number of Gauss-Legendre nodes, split into panels of [`PANEL_NODES`].
    pub nodes: usize,
    /// Largest tolerated integrand magnitude at the truncation points, relative to the price scale.
    pub tail_tol: f64,
}

/// Nodes per Gauss-Legendre panel.
pub const PANEL_NODES: usize = 20;

impl Default for FourierConfig {
    fn default() -> Self {
        Self { xi_imag: -1.75, truncation: 200.0, nodes: 2000, tail_tol: 1e-12 }
    }
}

impl FourierConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi_imag < -1.0) {
            return Err(Error::Domain(format!("contour xi_imag = {} must be below -1", self.xi_imag)));
        }
        if !(self.truncation > 0.0) || self.nodes < PANEL_NODES {
            return Err(Error::Domain("truncation must be positive and nodes at least one panel".into()));
        }
        Ok(())
    }
}

/// `ln(1 + w) / w`, continuous at `w = 0`.
fn log1p_ratio(w: Complex64) -> Complex64 {
    if w.norm() < 1e-4 {
        1.0 - w / 2.0 + w * w / 3.0 - w * w * w / 4.0
    } else {
        (1.0 + w).ln() / w
    }
}

/// `log E[e^{iξ X_τ}]` for Heston in log-variance coordinates (`V = e^y`).
///
/// Uses the rotated form with `e^{-dτ}`, in which the principal logarithm is
/// continuous in `τ`. Written without dividing by `δ²`, so `δ = 0` is the
/// deterministic-variance limit.
pub fn heston_log_char_fn(p: &HestonParams, tau: f64, x: f64, y: f64, xi: Complex64) -> Complex64 {
    let HestonParams { kappa, theta, delta, rho } = *p;
    let b = kappa - rho * delta * I * xi;
    let q = xi * xi + I * xi;
    let d = (b * b + delta * delta * q).sqrt();
    let bd = b + d;
    // g = (b - d)/(b + d) = δ² h
    let h = -q / (bd * bd);
    let g = delta * delta * h;
    let e = (-d * tau).exp();
    let w = g * (1.0 - e) / (1.0 - g);
    let c = kappa * theta * (-q / bd * tau - 2.0 * h * (1.0 - e) / (1.0 - g) * log1p_ratio(w));
    let dd = -q / bd * (1.0 - e) / (1.0 - g * e);
    I * xi * x + c + dd * y.exp()
}

/// The textbook form `exp(iξx + C + D e^y)` with `f = (b + d)/(b - d)` and
/// growing exponentials `e^{dτ}`, principal logarithm. Matches
/// [`heston_log_char_fn`] only while the logarithm's argument stays off the
/// branch cut; kept as a cross-check.
pub fn heston_char_fn_textbook(p: &HestonParams, tau: f64, x: f64, y: f64, xi: Complex64) -> Complex64 {
    let HestonParams { kappa, theta, delta, rho } = *p;
    let b = kappa - rho * delta * I * xi;
    let d = (delta * delta * (xi * xi + I * xi) + b * b).sqrt();
    let f = (b + d) / (b - d);
    let ed = (d * tau).exp();
    let c = kappa * theta / (delta * delta) * ((b + d) * tau - 2.0 * ((1.0 - f * ed) / (1.0 - f)).ln());
    let dd = (b + d) / (delta * delta) * (1.0 - ed) / (1.0 - f * ed);
    (I * xi * x + c + dd * y.exp()).exp()
}

/// `E[e^{iξ X_τ}]`.
pub fn heston_char_fn(p: &HestonParams, tau: f64, x: f64, y: f64, xi: Complex64) -> Complex64 {
    heston_log_char_fn(p, tau, x, y, xi).exp()
}

/// Call or put on `e^{Z}` under Heston dynamics for the ETF, zero rates.
///
/// The LETF is again Heston with mapped parameters, so the price is the
/// generalized Fourier integral of the call payoff against the mapped
/// characteristic function. Puts follow from parity.
pub fn heston_fourier_price(
    params: &HestonParams,
    point: &MarketPoint,
    cfg: &FourierConfig,
    payoff: Payoff,
) -> Result<f64> {
    cfg.validate()?;
    point.validate()?;
    let tau = point.tau();
    let (pz, yz) = heston_beta_map(params, point.y, point.beta)?;
    let (z, k) = (point.z, point.k);
    let integrand = |xr: f64| -> f64 {
        let xi = Complex64::new(xr, cfg.xi_imag);
        let eta = heston_log_char_fn(&pz, tau, z, yz, xi);
        let phi_hat = -(k - I * k * xi).exp() / (I * xi + xi * xi);
        (eta.exp() * phi_hat).re
    };
    let scale = z.exp().max(k.exp());
    let tail = integrand(cfg.truncation).abs().max(integrand(-cfg.truncation).abs());
    if !(tail <= cfg.tail_tol * scale) {
        return Err(Error::Quadrature(format!(
            "integrand magnitude {tail:e} at |xi_r| = {} exceeds {:e} (tau = {tau}, k = {k})",
            cfg.truncation,
            cfg.tail_tol * scale
        )));
    }
    let panels = cfg.nodes / PANEL_NODES;
    let rule = GaussLegendre::new(NonZeroUsize::new(PANEL_NODES).expect("nonzero"));
    let width = 2.0 * cfg.truncation / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let a = -cfg.truncation + p as f64 * width;
        total += rule.integrate(a, a + width, integrand);
    }
    let call = total / (2.0 * std::f64::consts::PI);
    if !call.is_finite() {
        return Err(Error::Quadrature(format!("non-finite price {call}")));
    }
    Ok(match payoff {
        Payoff::Call => call,
        Payoff::Put => call - z.exp() + k.exp(),
    })
}

/// LETF smile on `lams` from Fourier prices of out-of-the-money options.
/// Strikes that cannot be inverted are listed in [`SmileCurve::excluded`].
pub fn fourier_implied_smile(
    params: &HestonParams,
    point: &MarketPoint,
    lams: &[f64],
    cfg: &FourierConfig,
) -> Result<SmileCurve> {
    let tau = point.tau();
    let mut pts = Vec::new();
    let mut excluded = Vec::new();
    for &lam in lams {
        let pt = point.with_lam(lam);
        let payoff = if lam < 0.0 { Payoff::Put } else { Payoff::Call };
        let otm = heston_fourier_price(params, &pt, cfg, payoff)?;
        let call = match payoff {
            Payoff::Call => otm,
            Payoff::Put => otm + pt.z.exp() - pt.k.exp(),
        };
        match implied_vol(call, tau, pt.z, pt.k) {
            Ok(v) => pts.push(SmilePoint { price: Some(call), ..SmilePoint::new(lam, v.value) }),
            Err(Error::NoArbitrage { .. } | Error::SolverFailed { .. }) => excluded.push(lam),
            Err(e) => return Err(e),
        }
    }
    let meta = SmileMeta { model: "heston".into(), beta: point.beta, tau, method: "fourier".into() };
    let mut curve = SmileCurve::new(pts, meta)?;
    curve.excluded = excluded;
    Ok(curve)
}
