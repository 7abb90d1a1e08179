//! Normal-ordered operator products and the first-order operator for CEV.
use letf_smile::models::{taylor_table, ModelSpec};
use letf_smile::opalgebra::{build_l_n, reduce_to_z, LastFactor, OperatorPoly};

fn main() -> letf_smile::Result<()> {
    // Dx (x - x̄) = (x - x̄) Dx + 1
    let dx = OperatorPoly::<f64>::deriv(1, 0, 0, 1.0);
    let x = OperatorPoly::<f64>::x_shift();
    let show = |op: &OperatorPoly<f64>| op.canonical_text().lines().collect::<Vec<_>>().join("  +  ");
    println!("Dx X     = {}", show(&dx.mul(&x)));
    println!("(Dx X)^2 = {}", show(&dx.mul(&x).pow(2)));

    let model = ModelSpec::cev(0.2, -0.75)?;
    let table = taylor_table(&model, (0.0, 0.0), 2)?;
    let l1 = build_l_n(&table, 1, &2.0, LastFactor::Full)?;
    println!("L_1 has {} terms, max derivative order {}", l1.len(), l1.max_order());
    let red = reduce_to_z(&l1)?;
    println!("chi_m(0.25) = {:?}", red.eval(0.25));
    Ok(())
}
