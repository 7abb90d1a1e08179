//! Monte Carlo LETF smiles from one batch of ETF paths.
use letf_smile::models::{MarketPoint, ModelSpec};
use letf_smile::oracles::{simulate_paths, smile_from_paths, McConfig};

fn main() -> letf_smile::Result<()> {
    let model = ModelSpec::cev(0.2, -0.75)?;
    let cfg = McConfig { paths: 200_000, ..McConfig::default() };
    let pt = MarketPoint::at(0.5, 0.0, 0.0, 0.0, 0.0, 1.0)?;
    let paths = simulate_paths(&model, &pt, &cfg)?;
    println!("{} paths, {} absorbed", paths.ends.len(), paths.absorbed());
    let lams: Vec<f64> = (0..9).map(|i| -0.4 + 0.1 * i as f64).collect();
    for beta in [2.0, -2.0] {
        let smile = smile_from_paths(&paths, model.kind_name(), 0.0, beta, &lams)?;
        println!("beta = {beta}");
        for p in smile.points() {
            println!("  {:>5.2} {:.5} +- {:.5}", p.lam, p.iv, p.iv_half_width.unwrap_or(0.0));
        }
        if !smile.excluded.is_empty() {
            println!("  excluded {:?}", smile.excluded);
        }
    }
    Ok(())
}
