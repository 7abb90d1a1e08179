//! Implied-vol expansion for each built-in model, from the operator engine
//! and from the closed forms.
use letf_smile::expansion::{iv_series, Method};
use letf_smile::models::{MarketPoint, ModelSpec};

fn main() -> letf_smile::Result<()> {
    let models = [
        (ModelSpec::cev(0.2, -0.75)?, 0.0, 0.0, 3),
        (ModelSpec::heston(1.15, 0.04, 0.2, -0.4)?, 0.0, 0.04f64.ln(), 3),
        (ModelSpec::sabr(0.5, -0.5, 0.0)?, 0.0, -1.5, 2),
    ];
    let tau = 0.5;
    for (model, x, y, order) in &models {
        for beta in [1.0, 2.0, -2.0] {
            let pt = MarketPoint::at(tau, *x, *y, 0.0, 0.0, beta)?;
            let engine = iv_series(&pt, model, *order, Method::Engine)?;
            let printed = iv_series(&pt, model, *order, Method::Printed)?;
            let row: Vec<String> =
                [-0.2, 0.0, 0.2].iter().map(|&l| format!("{:.5}", engine.eval(beta * l, tau))).collect();
            let diff = (engine.eval(0.1, tau) - printed.eval(0.1, tau)).abs();
            println!("{:<6} beta={beta:>4}: {}  (engine - printed {diff:.1e})", model.kind_name(), row.join(" "));
        }
    }
    let pt = MarketPoint::at(tau, 0.0, 0.0, 0.0, 0.0, -2.0)?;
    println!("{}", iv_series(&pt, &models[0].0, 2, Method::Engine)?.to_json());
    Ok(())
}
