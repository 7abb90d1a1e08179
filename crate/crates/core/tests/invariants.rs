mod common;

use common::*;
use letf_smile::blackscholes::{bs_call_price, bs_put_price, implied_vol, BsInputs, Payoff};
use letf_smile::expansion::{iv_series, price_un, Method};
use letf_smile::models::{taylor_table, MarketPoint, ModelSpec};
use letf_smile::oracles::{heston_fourier_price, FourierConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn kind() -> impl Strategy<Value = &'static str> {
    prop_oneof![Just("general"), Just("cev"), Just("heston"), Just("sabr")]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn call_increases_with_vol(s in 0.01f64..3.0, bump in 1e-4f64..0.5, tau in 0.05f64..3.0, z in -1.0f64..1.0, m in -3.0f64..3.0) {
        // far from the money the price sits on intrinsic value to machine precision
        let k = z + m * s * tau.sqrt();
        let lo = bs_call_price(&BsInputs::new(s, tau, z, k).unwrap()).unwrap();
        let hi = bs_call_price(&BsInputs::new(s + bump, tau, z, k).unwrap()).unwrap();
        prop_assert!(hi > lo);
    }

    #[test]
    fn put_call_parity(s in 0.01f64..3.0, tau in 0.01f64..3.0, z in -1.0f64..1.0, k in -1.0f64..1.0) {
        let inp = BsInputs::new(s, tau, z, k).unwrap();
        let res = bs_call_price(&inp).unwrap() - bs_put_price(&inp).unwrap() - z.exp() + k.exp();
        prop_assert!(res.abs() <= 1e-14 * z.exp().max(k.exp()), "residual {res:e}");
    }

    #[test]
    fn implied_vol_inverts_price(s in 0.01f64..3.0, tau in 0.05f64..2.0, z in -0.5f64..0.5, m in -2.0f64..2.0) {
        let k = z + m * s * tau.sqrt();
        let price = bs_call_price(&BsInputs::new(s, tau, z, k).unwrap()).unwrap();
        let iv = implied_vol(price, tau, z, k).unwrap().value;
        prop_assert!((iv - s).abs() <= 1e-10 * s, "{iv} vs {s}");
    }

    /// σ_n is a polynomial of degree at most n in λ.
    #[test]
    fn lambda_degree_bounded_by_order(kind in kind(), seed in any::<u64>()) {
        let (model, pt) = random_case(kind, &mut ChaCha8Rng::seed_from_u64(seed));
        let order = printed_order(kind);
        let s = iv_series(&pt, &model, order, Method::Engine).unwrap();
        for n in 1..=order {
            prop_assert!(s.term(n).unwrap().lam_degree() <= n as u32);
        }
    }

    /// σ₀ sees the leverage only through |β|.
    #[test]
    fn sigma0_depends_on_abs_beta(kind in kind(), seed in any::<u64>()) {
        let (model, pt) = random_case(kind, &mut ChaCha8Rng::seed_from_u64(seed));
        let a = iv_series(&pt, &model, 1, Method::Engine).unwrap().sigma0;
        let b = iv_series(&pt.with_beta(-pt.beta), &model, 1, Method::Engine).unwrap().sigma0;
        prop_assert_eq!(a, b);
    }
}

/// With β = 1 the LETF expansion is the ETF expansion: σ₀ = √(2 a₀₀) and the
/// first-order CEV skew is `(γ - 1) δ e^{(γ-1)x} / 2` per unit λ.
#[test]
fn unit_leverage_is_the_etf() {
    for (delta, gamma, x) in [(0.2, -0.75, 0.0), (0.3, 0.5, 0.1), (0.25, 1.0, -0.2)] {
        let model = ModelSpec::cev(delta, gamma).unwrap();
        let pt = MarketPoint::at(0.5, x, 0.0, 0.0, 0.0, 1.0).unwrap();
        let s = iv_series(&pt, &model, 1, Method::Engine).unwrap();
        let vol = delta * ((gamma - 1.0) * x).exp();
        assert!((s.sigma0 - vol).abs() < 1e-15);
        let skew = s.term(1).unwrap().coeff(1, 0);
        assert!((skew - 0.5 * (gamma - 1.0) * vol).abs() < 1e-14, "{skew}");
    }
}

/// BS at the truncated implied vol and the truncated price expansion differ
/// by the next-order residual, `C τ^{(N+2)/2}` with C roughly constant.
#[test]
fn price_and_vol_routes_agree_to_next_order() {
    for (model, x, y) in reference_models() {
        let table = taylor_table(&model, (x, y), 3).unwrap();
        let max_n = if model.kind_name() == "sabr" { 2 } else { 3 };
        for n in 1..=max_n {
            let c: Vec<f64> = [0.1f64, 0.2, 0.4]
                .iter()
                .map(|&tau| {
                    // strike half a standard deviation out of the money
                    let k = 0.2 * tau.sqrt();
                    let pt = MarketPoint::at(tau, x, y, 0.0, k, 2.0).unwrap();
                    let iv = iv_series(&pt, &model, n, Method::Engine).unwrap().eval(k, tau);
                    let via_vol = bs_call_price(&BsInputs::new(iv, tau, 0.0, k).unwrap()).unwrap();
                    let via_price = price_un(&pt, &table, n, Payoff::Call).unwrap().total;
                    (via_vol - via_price).abs() / tau.powf((n as f64 + 2.0) / 2.0)
                })
                .collect();
            let (lo, hi) = (c.iter().cloned().fold(f64::MAX, f64::min), c.iter().cloned().fold(0.0, f64::max));
            assert!(hi <= 3.0 * lo, "{} N={n}: {c:?}", model.kind_name());
        }
    }
}

#[test]
fn fourier_prices_are_bitwise_reproducible() {
    let ModelSpec::Heston(p) = heston_ref() else { unreachable!() };
    let pt = MarketPoint::at(0.5, 0.0, LOG_THETA, 0.0, 0.1, -2.0).unwrap();
    let cfg = FourierConfig::default();
    let a = heston_fourier_price(&p, &pt, &cfg, Payoff::Call).unwrap();
    let b = heston_fourier_price(&p, &pt, &cfg, Payoff::Call).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
}
