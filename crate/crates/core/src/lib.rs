//! Implied volatility of leveraged ETF options under local-stochastic volatility:
//! closed-form asymptotic smiles, the operator engine that generates them, and
//! Monte Carlo / Fourier reference prices.

// `!(a > b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blackscholes;
pub mod cli;
pub mod error;
pub mod models;
pub mod opalgebra;

pub use error::{Error, Result};
pub mod expansion;
pub mod oracles;
pub mod scaling;
