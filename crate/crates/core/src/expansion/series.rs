use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse Laurent polynomial in log-moneyness `λ` and time to maturity `τ`.
///
/// Negative powers of `τ` show up while implied-vol terms are assembled and
/// must cancel before a series is returned.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LamTauPoly {
    terms: BTreeMap<(u32, i32), f64>,
}

impl LamTauPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::term(0, 0, c)
    }

    pub fn term(lam_pow: u32, tau_pow: i32, value: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(lam_pow, tau_pow, value);
        p
    }

    /// Builds from `(tau_pow, lam_pow, value)` triples.
    pub fn from_terms(terms: &[(i32, u32, f64)]) -> Self {
        let mut p = Self::zero();
        for &(t, l, v) in terms {
            p.add_term(l, t, v);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, lam_pow: u32, tau_pow: i32, value: f64) {
        if value == 0.0 {
            return;
        }
        let e = self.terms.entry((lam_pow, tau_pow)).or_insert(0.0);
        *e += value;
        if *e == 0.0 {
            self.terms.remove(&(lam_pow, tau_pow));
        }
    }

    /// Coefficient of `λ^l τ^t`.
    pub fn coeff(&self, lam_pow: u32, tau_pow: i32) -> f64 {
        self.terms.get(&(lam_pow, tau_pow)).copied().unwrap_or(0.0)
    }

    /// `((lam_pow, tau_pow), value)` in sorted order.
    pub fn terms(&self) -> impl Iterator<Item = ((u32, i32), f64)> + '_ {
        self.terms.iter().map(|(k, v)| (*k, *v))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&(l, t), &v) in &other.terms {
            out.add_term(l, t, v);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::zero();
        for (&(l, t), &v) in &self.terms {
            out.add_term(l, t, v * s);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (&(la, ta), &va) in &self.terms {
            for (&(lb, tb), &vb) in &other.terms {
                out.add_term(la + lb, ta + tb, va * vb);
            }
        }
        out
    }

    pub fn eval(&self, lam: f64, tau: f64) -> f64 {
        self.terms.iter().map(|(&(l, t), &v)| v * lam.powi(l as i32) * tau.powi(t)).sum()
    }

    pub fn lam_degree(&self) -> u32 {
        self.terms.keys().map(|k| k.0).max().unwrap_or(0)
    }

    pub fn min_tau_power(&self) -> i32 {
        self.terms.keys().map(|k| k.1).min().unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Removes terms that must vanish (negative `τ` powers, `λ` degree above
    /// `max_lam`) after checking that they are negligible against `scale`.
    pub fn drop_structural_zeros(&self, max_lam: u32, scale: f64, rel_tol: f64) -> Result<Self> {
        let mut out = Self::zero();
        for (&(l, t), &v) in &self.terms {
            if t < 0 || l > max_lam {
                if v.abs() > rel_tol * scale {
                    return Err(Error::Structural(format!(
                        "term λ^{l} τ^{t} with coefficient {v:e} does not cancel (scale {scale:e})"
                    )));
                }
                continue;
            }
            out.add_term(l, t, v);
        }
        Ok(out)
    }
}

impl fmt::Display for LamTauPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (&(l, t), &v)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({v:e})")?;
            if l > 0 {
                write!(f, "*lam^{l}")?;
            }
            if t != 0 {
                write!(f, "*tau^{t}")?;
            }
        }
        Ok(())
    }
}

/// Implied-vol expansion `σ₀ + σ₁ + … + σ_N`, each `σ_n` a polynomial in
/// `(λ, τ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SeriesJson", try_from = "SeriesJson")]
pub struct IvSeries {
    pub sigma0: f64,
    /// `terms[n - 1]` is `σ_n`.
    pub terms: Vec<LamTauPoly>,
}

impl IvSeries {
    pub fn order(&self) -> usize {
        self.terms.len()
    }

    pub fn term(&self, n: usize) -> Option<&LamTauPoly> {
        if n == 0 {
            None
        } else {
            self.terms.get(n - 1)
        }
    }

    /// `σ₀ + Σ_{n ≤ order} σ_n(λ, τ)`.
    pub fn eval_order(&self, lam: f64, tau: f64, order: usize) -> f64 {
        self.sigma0 + self.terms.iter().take(order).map(|p| p.eval(lam, tau)).sum::<f64>()
    }

    pub fn eval(&self, lam: f64, tau: f64) -> f64 {
        self.eval_order(lam, tau, self.terms.len())
    }

    pub fn truncate(&self, order: usize) -> Self {
        Self { sigma0: self.sigma0, terms: self.terms.iter().take(order).cloned().collect() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("series serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Numerical(format!("invalid series JSON: {e}")))
    }
}

#[derive(Serialize, Deserialize)]
struct CoeffJson {
    lam_pow: u32,
    tau_pow: i32,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    n: usize,
    coeffs: Vec<CoeffJson>,
}

#[derive(Serialize, Deserialize)]
struct SeriesJson {
    sigma0: f64,
    terms: Vec<TermJson>,
}

impl From<IvSeries> for SeriesJson {
    fn from(s: IvSeries) -> Self {
        SeriesJson {
            sigma0: s.sigma0,
            terms: s
                .terms
                .iter()
                .enumerate()
                .map(|(i, p)| TermJson {
                    n: i + 1,
                    coeffs: p
                        .terms()
                        .map(|((lam_pow, tau_pow), value)| CoeffJson { lam_pow, tau_pow, value })
                        .collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<SeriesJson> for IvSeries {
    type Error = String;

    fn try_from(j: SeriesJson) -> std::result::Result<Self, String> {
        let mut terms = vec![LamTauPoly::zero(); j.terms.len()];
        for t in j.terms {
            if t.n == 0 || t.n > terms.len() {
                return Err(format!("term index {} out of range", t.n));
            }
            for c in t.coeffs {
                terms[t.n - 1].add_term(c.lam_pow, c.tau_pow, c.value);
            }
        }
        Ok(IvSeries { sigma0: j.sigma0, terms })
    }
}
