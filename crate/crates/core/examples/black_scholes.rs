//! Prices, vega and implied vol in log coordinates.
use letf_smile::blackscholes::{bs_call_price, bs_put_price, bs_vega, implied_vol, vega_ratio, BsInputs};

fn main() -> letf_smile::Result<()> {
    let (sigma, tau, z) = (0.4, 0.5, 0.0);
    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "k", "call", "put", "vega", "iv");
    for k in [-0.3, -0.1, 0.0, 0.1, 0.3] {
        let inp = BsInputs::new(sigma, tau, z, k)?;
        let call = bs_call_price(&inp)?;
        let iv = implied_vol(call, tau, z, k)?.value;
        println!("{k:>6.2} {call:>10.6} {:>10.6} {:>10.6} {iv:>10.6}", bs_put_price(&inp)?, bs_vega(&inp)?);
    }
    let atm = BsInputs::new(sigma, tau, z, 0.05)?;
    for n in 2..=3 {
        println!("d^{n} vega / vega = {:.6}", vega_ratio(n, &atm)?);
    }
    Ok(())
}
