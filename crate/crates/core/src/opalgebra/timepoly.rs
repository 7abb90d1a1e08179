use std::collections::BTreeMap;
use std::fmt;

use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Number of time slots: slot 0 is `τ = T - t`, slots `1..` are `u_i = t_i - t`.
pub const TIME_SLOTS: usize = 7;

/// Highest simplex dimension supported by [`TimePoly::simplex_integrate`].
pub const MAX_SIMPLEX_DIM: usize = TIME_SLOTS - 1;

/// Exponents of `τ, u_1, …, u_6`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TimeMono(pub [u8; TIME_SLOTS]);

impl TimeMono {
    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    fn mul(&self, other: &TimeMono) -> TimeMono {
        let mut out = [0u8; TIME_SLOTS];
        for (slot, o) in out.iter_mut().enumerate() {
            *o = self.0[slot] + other.0[slot];
        }
        TimeMono(out)
    }

    /// Highest `u` index with a nonzero exponent.
    fn max_u(&self) -> usize {
        (1..TIME_SLOTS).rev().find(|&i| self.0[i] > 0).unwrap_or(0)
    }
}

/// Sparse polynomial in elapsed times with scalar coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct TimePoly<S> {
    terms: BTreeMap<TimeMono, S>,
}

impl<S: Scalar> Default for TimePoly<S> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<S: Scalar> TimePoly<S> {
    pub fn zero() -> Self {
        Self { terms: BTreeMap::new() }
    }

    pub fn constant(c: S) -> Self {
        Self::monomial(TimeMono::default(), c)
    }

    pub fn monomial(mono: TimeMono, c: S) -> Self {
        let mut p = Self::zero();
        p.add_term(mono, c);
        p
    }

    /// The single variable `u_index` (index 0 is `τ`).
    pub fn var(index: usize) -> Self {
        let mut mono = [0u8; TIME_SLOTS];
        mono[index] = 1;
        Self::monomial(TimeMono(mono), S::one())
    }

    pub fn tau_power(power: u8, c: S) -> Self {
        let mut mono = [0u8; TIME_SLOTS];
        mono[0] = power;
        Self::monomial(TimeMono(mono), c)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&TimeMono, &S)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, mono: TimeMono, c: S) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&mono) {
            Some(existing) => {
                let sum = existing.clone() + c;
                if sum.is_zero() {
                    self.terms.remove(&mono);
                } else {
                    *existing = sum;
                }
            }
            None => {
                self.terms.insert(mono, c);
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (m, c) in &other.terms {
            self.add_term(*m, c.clone());
        }
    }

    pub fn neg(&self) -> Self {
        Self { terms: self.terms.iter().map(|(m, c)| (*m, -c.clone())).collect() }
    }

    pub fn scale(&self, s: &S) -> Self {
        if s.is_zero() {
            return Self::zero();
        }
        Self { terms: self.terms.iter().map(|(m, c)| (*m, c.clone() * s.clone())).collect() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca.clone() * cb.clone());
            }
        }
        out
    }

    /// Largest absolute coefficient, as f64.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.abs_f64()).fold(0.0, f64::max)
    }

    /// Whether any `u_i` slot is in use.
    pub fn depends_on_u(&self) -> bool {
        self.terms.keys().any(|m| m.max_u() > 0)
    }

    /// Evaluates with `τ` and `u_1, …` given by `values[0], values[1], …`.
    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let mut v = c.to_f64();
                for (slot, &e) in m.0.iter().enumerate() {
                    if e > 0 {
                        v *= values.get(slot).copied().unwrap_or(0.0).powi(e as i32);
                    }
                }
                v
            })
            .sum()
    }

    /// Evaluates a polynomial in `τ` only.
    pub fn eval_tau(&self, tau: f64) -> f64 {
        self.eval(&[tau])
    }

    /// Integrates over the ordered simplex `0 < u_1 < … < u_k < τ` by exact
    /// iterated antidifferentiation; the result is a polynomial in `τ`.
    pub fn simplex_integrate_symbolic(&self, k: usize) -> Result<Self> {
        if k > MAX_SIMPLEX_DIM {
            return Err(Error::Domain(format!("simplex dimension {k} exceeds {MAX_SIMPLEX_DIM}")));
        }
        if let Some(bad) = self.terms.keys().map(|m| m.max_u()).find(|&u| u > k) {
            return Err(Error::Domain(format!("time variable u_{bad} out of range for a {k}-simplex")));
        }
        let mut current = self.clone();
        for j in (1..=k).rev() {
            let mut next = Self::zero();
            for (mono, c) in &current.terms {
                let e = mono.0[j];
                let factor = S::from_ratio(1, e as i64 + 1);
                let mut base = *mono;
                base.0[j] = 0;
                // τ^{e+1} / (e+1)
                let mut upper = base;
                upper.0[0] += e + 1;
                next.add_term(upper, c.clone() * factor.clone());
                // - u_{j-1}^{e+1} / (e+1); lower limit is 0 for j = 1
                if j > 1 {
                    let mut lower = base;
                    lower.0[j - 1] += e + 1;
                    next.add_term(lower, -(c.clone() * factor));
                }
            }
            current = next;
        }
        Ok(current)
    }

    /// Numeric simplex integral at a given `τ`.
    pub fn simplex_integrate(&self, k: usize, tau: f64) -> Result<f64> {
        Ok(self.simplex_integrate_symbolic(k)?.eval_tau(tau))
    }
}

impl<S: Scalar> fmt::Display for TimePoly<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (mono, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for (slot, &e) in mono.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let name = if slot == 0 { "tau".to_string() } else { format!("u{slot}") };
                if e == 1 {
                    write!(f, "*{name}")?;
                } else {
                    write!(f, "*{name}^{e}")?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        Q::from_ratio(n, d)
    }

    fn factorial(k: i64) -> i64 {
        (1..=k).product()
    }

    #[test]
    fn simplex_volume_is_tau_k_over_k_factorial() {
        for k in 0..=6usize {
            let vol = TimePoly::<Q>::constant(Q::from_i64(1)).simplex_integrate_symbolic(k).unwrap();
            let expected = TimePoly::tau_power(k as u8, q(1, factorial(k as i64)));
            assert_eq!(vol, expected, "k = {k}");
        }
    }

    #[test]
    fn single_and_double_integrals() {
        let u1 = TimePoly::<Q>::var(1);
        assert_eq!(u1.simplex_integrate_symbolic(1).unwrap(), TimePoly::tau_power(2, q(1, 2)));
        let u1u2 = u1.mul(&TimePoly::var(2));
        // ∫_0^τ u1 ∫_{u1}^τ u2 du2 du1 = τ⁴/8
        assert_eq!(u1u2.simplex_integrate_symbolic(2).unwrap(), TimePoly::tau_power(4, q(1, 8)));
        let v: f64 = TimePoly::<f64>::var(1).mul(&TimePoly::var(2)).simplex_integrate(2, 0.5).unwrap();
        assert!((v - 0.5f64.powi(4) / 8.0).abs() < 1e-16);
    }

    #[test]
    fn out_of_range_variable_is_rejected() {
        let u3 = TimePoly::<f64>::var(3);
        assert!(u3.simplex_integrate_symbolic(2).is_err());
        assert!(TimePoly::<f64>::constant(1.0).simplex_integrate_symbolic(7).is_err());
    }

    /// Monte Carlo-free check against a brute-force Riemann sum over the simplex.
    #[test]
    fn matches_midpoint_sum() {
        let p = TimePoly::<f64>::var(1).mul(&TimePoly::var(1)).add(&TimePoly::var(2).scale(&3.0));
        let tau = 0.8;
        let n = 800;
        let h = tau / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let u1 = (i as f64 + 0.5) * h;
            for j in 0..n {
                let u2 = (j as f64 + 0.5) * h;
                if u2 > u1 {
                    acc += p.eval(&[tau, u1, u2]) * h * h;
                }
            }
        }
        let exact = p.simplex_integrate(2, tau).unwrap();
        assert!((acc - exact).abs() < 2e-3 * exact.abs(), "{acc} vs {exact}");
    }
}
