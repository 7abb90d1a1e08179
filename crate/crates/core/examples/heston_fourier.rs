//! Exact Heston LETF smile by Fourier inversion next to the third-order expansion.
use letf_smile::expansion::{iv_series, Method};
use letf_smile::models::{MarketPoint, ModelSpec};
use letf_smile::oracles::{fourier_implied_smile, FourierConfig};

fn main() -> letf_smile::Result<()> {
    let model = ModelSpec::heston(1.15, 0.04, 0.2, -0.4)?;
    let ModelSpec::Heston(params) = &model else { unreachable!() };
    let (tau, beta) = (0.5, -2.0);
    let pt = MarketPoint::at(tau, 0.0, 0.04f64.ln(), 0.0, 0.0, beta)?;
    let lams: Vec<f64> = (0..9).map(|i| -0.4 + 0.1 * i as f64).collect();
    let exact = fourier_implied_smile(params, &pt, &lams, &FourierConfig::default())?;
    let series = iv_series(&pt, &model, 3, Method::Engine)?;
    println!("{:>6} {:>9} {:>9} {:>9}", "lam", "fourier", "order 3", "gap");
    for p in exact.points() {
        let a = series.eval(p.lam, tau);
        println!("{:>6.2} {:>9.5} {:>9.5} {:>9.1e}", p.lam, p.iv, a, a - p.iv);
    }
    Ok(())
}
