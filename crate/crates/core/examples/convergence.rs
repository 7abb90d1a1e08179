//! Error of each expansion order against Fourier prices as maturity shrinks.
use letf_smile::cli::convergence_report;
use letf_smile::models::{MarketPoint, ModelSpec};
use letf_smile::oracles::FourierConfig;

fn main() -> letf_smile::Result<()> {
    let model = ModelSpec::heston(1.15, 0.04, 0.2, -0.4)?;
    let taus = [0.05, 0.1, 0.2, 0.4];
    let pt = MarketPoint::at(taus[0], 0.0, 0.04f64.ln(), 0.0, 0.0, 2.0)?;
    let rep = convergence_report(&model, &pt, &taus, 3, &FourierConfig::default())?;
    for r in &rep.rows {
        println!("tau {:<5} N={} error {:.3e}", r.tau, r.order, r.abs_error);
    }
    for (n, s) in rep.slopes.iter().enumerate() {
        println!("order {n}: log-log slope {s:.2}");
    }
    Ok(())
}
