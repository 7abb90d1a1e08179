//! How far an LETF smile is from the rescaled ETF smile as maturity grows.
use letf_smile::expansion::{iv_series, Method};
use letf_smile::models::{MarketPoint, ModelSpec};
use letf_smile::scaling::{smile_distance, SmileCurve, SmileMeta};

fn curve(model: &ModelSpec, tau: f64, beta: f64, lams: &[f64]) -> letf_smile::Result<SmileCurve> {
    let s = iv_series(&MarketPoint::at(tau, 0.0, -1.5, 0.0, 0.0, beta)?, model, 2, Method::Engine)?;
    let meta = SmileMeta { model: model.kind_name().into(), beta, tau, method: "engine".into() };
    SmileCurve::from_fn(lams, meta, |l| s.eval(l, tau))
}

fn main() -> letf_smile::Result<()> {
    let model = ModelSpec::sabr(0.5, -0.5, 0.0)?;
    let lams: Vec<f64> = (0..41).map(|i| -0.2 + 0.01 * i as f64).collect();
    for beta in [2.0, -2.0, -3.0] {
        print!("beta {beta:>4}:");
        for tau in [0.05, 0.25, 1.0] {
            let etf = curve(&model, tau, 1.0, &lams)?.scale_x_to_z(beta)?;
            let letf = curve(&model, tau, beta, &lams)?;
            print!("  tau {tau}: {:6.1} bps", 1e4 * smile_distance(&letf, &etf, Some((-0.1, 0.1)))?);
        }
        println!();
    }
    Ok(())
}
