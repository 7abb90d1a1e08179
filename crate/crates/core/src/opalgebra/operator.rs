//! Differential operators in normal order.
//!
//! A monomial is `X^p Y^q Dx^i Dy^j Dz^m` where `X` and `Y` multiply by
//! `x - x̄` and `y - ȳ`. Multiplication operators always sit to the left of
//! derivatives, and products are brought back to that order with the Weyl
//! rule `Dx X = X Dx + 1`. Operators without `X`/`Y` factors multiply
//! commutatively; `Dz` commutes with everything.

use std::collections::BTreeMap;
use std::fmt;

use super::scalar::Scalar;
use super::timepoly::TimePoly;

/// Exponents of `(X, Y, Dx, Dy, Dz)` in normal order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct OpMono {
    pub x: u8,
    pub y: u8,
    pub dx: u8,
    pub dy: u8,
    pub dz: u8,
}

impl OpMono {
    pub const fn deriv(dx: u8, dy: u8, dz: u8) -> Self {
        Self { x: 0, y: 0, dx, dy, dz }
    }

    /// Total derivative order.
    pub fn order(&self) -> u32 {
        self.dx as u32 + self.dy as u32 + self.dz as u32
    }

    pub fn is_pure_z(&self) -> bool {
        self.x == 0 && self.y == 0 && self.dx == 0 && self.dy == 0
    }
}

fn binomial(n: u8, r: u8) -> i64 {
    let mut acc = 1i64;
    for i in 0..r as i64 {
        acc = acc * (n as i64 - i) / (i + 1);
    }
    acc
}

fn falling(n: u8, r: u8) -> i64 {
    (0..r as i64).map(|i| n as i64 - i).product()
}

/// `(P^a D^b)(P^c D^d)` for one Weyl pair, as `(power of P, power of D, weight)`.
fn weyl_pair(a: u8, b: u8, c: u8, d: u8) -> impl Iterator<Item = (u8, u8, i64)> {
    (0..=b.min(c)).map(move |r| (a + c - r, b + d - r, binomial(b, r) * falling(c, r)))
}

/// Product of two normal-ordered monomials.
pub fn mono_mul(lhs: &OpMono, rhs: &OpMono) -> Vec<(OpMono, i64)> {
    let mut out = Vec::new();
    for (x, dx, wx) in weyl_pair(lhs.x, lhs.dx, rhs.x, rhs.dx) {
        for (y, dy, wy) in weyl_pair(lhs.y, lhs.dy, rhs.y, rhs.dy) {
            out.push((OpMono { x, y, dx, dy, dz: lhs.dz + rhs.dz }, wx * wy));
        }
    }
    out
}

/// Sparse operator polynomial with time-polynomial coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorPoly<S> {
    terms: BTreeMap<OpMono, TimePoly<S>>,
}

impl<S: Scalar> Default for OperatorPoly<S> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<S: Scalar> OperatorPoly<S> {
    pub fn zero() -> Self {
        Self { terms: BTreeMap::new() }
    }

    pub fn one() -> Self {
        Self::term(OpMono::default(), TimePoly::constant(S::one()))
    }

    pub fn term(mono: OpMono, coeff: TimePoly<S>) -> Self {
        let mut p = Self::zero();
        p.add_term(mono, coeff);
        p
    }

    /// A derivative monomial with constant coefficient.
    pub fn deriv(dx: u8, dy: u8, dz: u8, c: S) -> Self {
        Self::term(OpMono::deriv(dx, dy, dz), TimePoly::constant(c))
    }

    pub fn scalar(c: S) -> Self {
        Self::deriv(0, 0, 0, c)
    }

    /// Multiplication by `x - x̄`.
    pub fn x_shift() -> Self {
        Self::term(OpMono { x: 1, ..Default::default() }, TimePoly::constant(S::one()))
    }

    /// Multiplication by `y - ȳ`.
    pub fn y_shift() -> Self {
        Self::term(OpMono { y: 1, ..Default::default() }, TimePoly::constant(S::one()))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&OpMono, &TimePoly<S>)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, mono: &OpMono) -> Option<&TimePoly<S>> {
        self.terms.get(mono)
    }

    pub fn add_term(&mut self, mono: OpMono, coeff: TimePoly<S>) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.get_mut(&mono) {
            Some(existing) => {
                existing.add_assign(&coeff);
                if existing.is_zero() {
                    self.terms.remove(&mono);
                }
            }
            None => {
                self.terms.insert(mono, coeff);
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

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        Self { terms: self.terms.iter().map(|(m, c)| (*m, c.neg())).collect() }
    }

    pub fn scale(&self, s: &S) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            out.add_term(*m, c.scale(s));
        }
        out
    }

    pub fn scale_time(&self, p: &TimePoly<S>) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            out.add_term(*m, c.mul(p));
        }
        out
    }

    /// Operator composition `self ∘ other` (apply `other` first).
    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let coeff = ca.mul(cb);
                for (mono, weight) in mono_mul(ma, mb) {
                    out.add_term(mono, coeff.scale(&S::from_i64(weight)));
                }
            }
        }
        out
    }

    pub fn pow(&self, n: usize) -> Self {
        let mut out = Self::one();
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Highest total derivative order among the terms.
    pub fn max_order(&self) -> u32 {
        self.terms.keys().map(OpMono::order).max().unwrap_or(0)
    }

    /// Applies `f` to every time coefficient.
    pub fn map_coefficients<E>(
        &self,
        mut f: impl FnMut(&TimePoly<S>) -> std::result::Result<TimePoly<S>, E>,
    ) -> std::result::Result<Self, E> {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            out.add_term(*m, f(c)?);
        }
        Ok(out)
    }

    /// Canonical text dump, one term per line, sorted by monomial.
    pub fn canonical_text(&self) -> String {
        self.to_string()
    }
}

impl<S: Scalar> fmt::Display for OperatorPoly<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return writeln!(f, "0");
        }
        for (m, c) in &self.terms {
            writeln!(f, "X^{} Y^{} Dx^{} Dy^{} Dz^{} : {}", m.x, m.y, m.dx, m.dy, m.dz, c)?;
        }
        Ok(())
    }
}
