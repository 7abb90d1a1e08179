//! From a Taylor table to the correction operators `L_n` and their
//! reduction to `Σ_m χ_m Dz^m (Dz² - Dz)`.
//!
//! Everything is built with the expansion point frozen at the evaluation
//! point, so the shift operators read `M_x - x̄ = X + u·(…)` where `X`
//! multiplies by `x - x̄` and vanishes only after all derivatives have been
//! applied.

use super::operator::{OpMono, OperatorPoly};
use super::scalar::Scalar;
use super::timepoly::{TimePoly, MAX_SIMPLEX_DIM};
use crate::error::{Error, Result};
use crate::models::{TaylorTable, MAX_ORDER};

/// Which shift operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shift {
    X,
    Y,
}

/// How the rightmost factor of each product is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LastFactor {
    /// The full `G_n`.
    Full,
    /// Only the `a β² (Dz² - Dz)` part of each `A_{n-k,k}`, which is all that
    /// survives when acting on a function of `z`.
    APart,
}

fn d<S: Scalar>(dx: u8, dy: u8, dz: u8, c: S) -> OperatorPoly<S> {
    OperatorPoly::deriv(dx, dy, dz, c)
}

fn heat_z<S: Scalar>(c: S) -> OperatorPoly<S> {
    d(0, 0, 2, c.clone()).add(&d(0, 0, 1, -c))
}

/// `A_{n-k,k}` with constant coefficients.
pub fn build_a_nk<S: Scalar>(table: &TaylorTable<S>, n: usize, k: usize, beta: &S) -> Result<OperatorPoly<S>> {
    if k > n {
        return Err(Error::Domain(format!("k = {k} exceeds n = {n}")));
    }
    let i = n - k;
    let a = table.a(i, k)?.clone();
    let b = table.b(i, k)?.clone();
    let c = table.c(i, k)?.clone();
    let f = table.f(i, k)?.clone();
    let two = S::from_i64(2);
    let mut op = OperatorPoly::zero();
    if !a.is_zero() {
        op.add_assign(&d(2, 0, 0, a.clone()));
        op.add_assign(&d(1, 0, 0, -a.clone()));
        op.add_assign(&heat_z(a.clone() * beta.clone() * beta.clone()));
        op.add_assign(&d(1, 0, 1, two * beta.clone() * a));
    }
    op.add_assign(&d(0, 2, 0, b));
    op.add_assign(&d(0, 1, 0, c));
    if !f.is_zero() {
        op.add_assign(&d(1, 1, 0, f.clone()));
        op.add_assign(&d(0, 1, 1, beta.clone() * f));
    }
    Ok(op)
}

/// `a_{n-k,k} β² (Dz² - Dz)`.
pub fn build_a_part<S: Scalar>(table: &TaylorTable<S>, n: usize, k: usize, beta: &S) -> Result<OperatorPoly<S>> {
    if k > n {
        return Err(Error::Domain(format!("k = {k} exceeds n = {n}")));
    }
    let a = table.a(n - k, k)?.clone();
    Ok(heat_z(a * beta.clone() * beta.clone()))
}

/// The drift part `u·[a₀₀(2Dx + 2βDz - 1) + f₀₀Dy]` (or the `y` analogue)
/// of a shift operator, with `u` in time slot `slot`.
pub fn build_m_shift<S: Scalar>(
    which: Shift,
    table: &TaylorTable<S>,
    beta: &S,
    slot: usize,
) -> Result<OperatorPoly<S>> {
    let a = table.a(0, 0)?.clone();
    let b = table.b(0, 0)?.clone();
    let c = table.c(0, 0)?.clone();
    let f = table.f(0, 0)?.clone();
    let two = S::from_i64(2);
    let op = match which {
        Shift::X => d(1, 0, 0, two.clone() * a.clone())
            .add(&d(0, 0, 1, two * beta.clone() * a.clone()))
            .add(&OperatorPoly::scalar(-a))
            .add(&d(0, 1, 0, f)),
        Shift::Y => d(1, 0, 0, f.clone())
            .add(&d(0, 0, 1, beta.clone() * f))
            .add(&d(0, 1, 0, two * b))
            .add(&OperatorPoly::scalar(c)),
    };
    Ok(op.scale_time(&TimePoly::var(slot)))
}

/// `M - x̄`: multiplication by the displacement plus the drift part.
pub fn build_m_full<S: Scalar>(which: Shift, table: &TaylorTable<S>, beta: &S, slot: usize) -> Result<OperatorPoly<S>> {
    let mult = match which {
        Shift::X => OperatorPoly::x_shift(),
        Shift::Y => OperatorPoly::y_shift(),
    };
    Ok(mult.add(&build_m_shift(which, table, beta, slot)?))
}

/// `G_n = Σ_k (M_x - x̄)^{n-k} (M_y - ȳ)^k A_{n-k,k}` in time slot `slot`.
pub fn build_g_n<S: Scalar>(
    table: &TaylorTable<S>,
    n: usize,
    beta: &S,
    slot: usize,
    last: LastFactor,
) -> Result<OperatorPoly<S>> {
    if n > table.order() {
        return Err(Error::UnsupportedOrder { order: n, reason: format!("table only has order {}", table.order()) });
    }
    let mx = build_m_full(Shift::X, table, beta, slot)?;
    let my = build_m_full(Shift::Y, table, beta, slot)?;
    let mut out = OperatorPoly::zero();
    for k in 0..=n {
        let a = match last {
            LastFactor::Full => build_a_nk(table, n, k, beta)?,
            LastFactor::APart => build_a_part(table, n, k, beta)?,
        };
        if a.is_zero() {
            continue;
        }
        out.add_assign(&mx.pow(n - k).mul(&my.pow(k)).mul(&a));
    }
    Ok(out)
}

/// Ordered compositions of `n` into `k` positive parts.
pub fn compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, k: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 0 {
            if n == 0 {
                out.push(prefix.clone());
            }
            return;
        }
        for first in 1..=n.saturating_sub(k - 1) {
            prefix.push(first);
            rec(n - first, k - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if k == 0 || k > n {
        return out;
    }
    rec(n, k, &mut Vec::new(), &mut out);
    out
}

/// Drops terms that annihilate a function of `z` alone when applied last.
fn keep_z_acting<S: Scalar>(op: &OperatorPoly<S>) -> OperatorPoly<S> {
    let mut out = OperatorPoly::zero();
    for (m, c) in op.terms() {
        if m.dx == 0 && m.dy == 0 {
            out.add_term(*m, c.clone());
        }
    }
    out
}

/// `L_n` with time variables integrated out; coefficients are polynomials in `τ`.
///
/// Products are accumulated right to left and pruned of terms whose rightmost
/// derivative is in `x` or `y`, since the result only ever acts on a function
/// of `z`.
pub fn build_l_n<S: Scalar>(table: &TaylorTable<S>, n: usize, beta: &S, last: LastFactor) -> Result<OperatorPoly<S>> {
    if n == 0 || n > MAX_ORDER || n > MAX_SIMPLEX_DIM {
        return Err(Error::UnsupportedOrder {
            order: n,
            reason: format!("correction order must lie in 1..={MAX_ORDER}"),
        });
    }
    if n > table.order() {
        return Err(Error::UnsupportedOrder { order: n, reason: format!("table only has order {}", table.order()) });
    }
    // g[slot][i] = G_i in time slot `slot`; the APart variant is used for the last factor only.
    let mut cache: std::collections::HashMap<(usize, usize, bool), OperatorPoly<S>> = std::collections::HashMap::new();
    let mut get = |i: usize, slot: usize, is_last: bool| -> Result<OperatorPoly<S>> {
        let key = (i, slot, is_last);
        if let Some(g) = cache.get(&key) {
            return Ok(g.clone());
        }
        let variant = if is_last { last } else { LastFactor::Full };
        let g = build_g_n(table, i, beta, slot, variant)?;
        cache.insert(key, g.clone());
        Ok(g)
    };
    let mut total = OperatorPoly::zero();
    for k in 1..=n {
        let mut summed = OperatorPoly::zero();
        for parts in compositions(n, k) {
            let mut acc = keep_z_acting(&get(parts[k - 1], k, true)?);
            for pos in (0..k - 1).rev() {
                acc = keep_z_acting(&get(parts[pos], pos + 1, false)?.mul(&acc));
            }
            summed.add_assign(&acc);
        }
        total.add_assign(&summed.map_coefficients(|c| c.simplex_integrate_symbolic(k))?);
    }
    Ok(total)
}

/// `Σ_m χ_m(τ) Dz^m (Dz² - Dz)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZReduction<S> {
    pub chi: Vec<TimePoly<S>>,
}

impl<S: Scalar> ZReduction<S> {
    pub fn is_zero(&self) -> bool {
        self.chi.iter().all(TimePoly::is_zero)
    }

    /// `χ_m(τ)` as numbers.
    pub fn eval(&self, tau: f64) -> Vec<f64> {
        self.chi.iter().map(|c| c.eval_tau(tau)).collect()
    }
}

/// Keeps the terms that survive on a function of `z` at the expansion point
/// and factors out `Dz² - Dz`.
pub fn reduce_to_z<S: Scalar>(op: &OperatorPoly<S>) -> Result<ZReduction<S>> {
    let mut c: Vec<TimePoly<S>> = Vec::new();
    let mut scale = 0.0f64;
    for (m, coeff) in op.terms() {
        if !m.is_pure_z() {
            continue;
        }
        if coeff.depends_on_u() {
            return Err(Error::Structural("time variables must be integrated out before reduction".into()));
        }
        let idx = m.dz as usize;
        if c.len() <= idx {
            c.resize(idx + 1, TimePoly::zero());
        }
        c[idx].add_assign(coeff);
        scale = scale.max(coeff.max_abs());
    }
    if c.len() <= 2 {
        c.resize(3, TimePoly::zero());
    }
    let top = c.len() - 1;
    // c_m = χ_{m-2} - χ_{m-1}
    let mut chi = vec![TimePoly::zero(); top - 1];
    for j in (0..top - 1).rev() {
        let next = if j + 1 < chi.len() { chi[j + 1].clone() } else { TimePoly::zero() };
        chi[j] = c[j + 2].add(&next);
    }
    let residual_1 = c[1].add(&chi[0]);
    let residual_0 = &c[0];
    let negligible = |p: &TimePoly<S>| p.terms().all(|(_, v)| v.negligible(scale));
    if !negligible(&residual_1) || !negligible(residual_0) {
        return Err(Error::Structural(format!(
            "operator is not divisible by Dz² - Dz (remainder {residual_0} + ({residual_1}) Dz)"
        )));
    }
    while chi.last().is_some_and(TimePoly::is_zero) {
        chi.pop();
    }
    Ok(ZReduction { chi })
}

/// Pure-`z` part of an operator, for tests and diagnostics.
pub fn z_part<S: Scalar>(op: &OperatorPoly<S>) -> OperatorPoly<S> {
    let mut out = OperatorPoly::zero();
    for (m, c) in op.terms() {
        if m.is_pure_z() {
            out.add_term(OpMono::deriv(0, 0, m.dz), c.clone());
        }
    }
    out
}
