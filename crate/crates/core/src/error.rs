use thiserror::Error;

/// Errors raised anywhere in the pricing and expansion pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("price {price} outside no-arbitrage bounds ({lower}, {upper})")]
    NoArbitrage { price: f64, lower: f64, upper: f64 },

    #[error("implied vol solver did not converge after {iterations} iterations (bracket [{lo}, {hi}])")]
    SolverFailed { iterations: usize, lo: f64, hi: f64 },

    #[error("unsupported order {order}: {reason}")]
    UnsupportedOrder { order: usize, reason: String },

    #[error("missing Taylor coefficient {name}_{{{i},{j}}}")]
    MissingCoefficient { name: char, i: usize, j: usize },

    #[error("structural error in operator reduction: {0}")]
    Structural(String),

    #[error("Fourier quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("query lambda={lam} outside sampled range [{min}, {max}]")]
    OutOfRange { lam: f64, min: f64, max: f64 },

    #[error("curves do not overlap")]
    EmptyOverlap,

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
