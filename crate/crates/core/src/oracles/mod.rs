//! Reference prices: Euler Monte Carlo for every model and Fourier pricing
//! for Heston.

mod heston;
mod mc;

pub use heston::{
    fourier_implied_smile, heston_char_fn, heston_char_fn_textbook, heston_fourier_price, heston_log_char_fn,
    FourierConfig, PANEL_NODES,
};
pub use mc::{
    mc_implied_smile, mc_simulate, pathwise_z_gap, simulate_paths, smile_from_paths, McConfig, McEstimate, McPaths,
    PathEnd, ABSORPTION_FLOOR,
};

use crate::error::{Error, Result};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "LETF_SMILE_THREADS";

/// Runs `f` on a pool limited by [`THREADS_ENV`] when it is set, otherwise on
/// the global pool.
pub fn run_with_worker_cap<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| Error::Config {
                line: 0,
                msg: format!("{THREADS_ENV} must be a positive integer, got '{v}'"),
            })?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Numerical(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}
