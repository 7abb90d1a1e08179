//! Operator algebra for the polynomial expansion: normal-ordered
//! differential operators with time-polynomial coefficients, exact simplex
//! integration, and the `L_n` pipeline.

mod operator;
mod pipeline;
mod scalar;
mod timepoly;

pub use operator::{mono_mul, OpMono, OperatorPoly};
pub use pipeline::{
    build_a_nk, build_a_part, build_g_n, build_l_n, build_m_full, build_m_shift, compositions, reduce_to_z, z_part,
    LastFactor, Shift, ZReduction,
};
pub use scalar::Scalar;
pub use timepoly::{TimeMono, TimePoly, MAX_SIMPLEX_DIM, TIME_SLOTS};
