#![allow(dead_code)]

use letf_smile::expansion::{iv_series, iv_series_engine, iv_series_general, IvSeries, Method};
use letf_smile::models::{Coeff, MarketPoint, ModelSpec, TaylorTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LOG_THETA: f64 = -3.2188758248682006;

pub fn cev_ref() -> ModelSpec {
    ModelSpec::cev(0.2, -0.75).unwrap()
}

pub fn heston_ref() -> ModelSpec {
    ModelSpec::heston(1.15, 0.04, 0.2, -0.4).unwrap()
}

pub fn sabr_ref() -> ModelSpec {
    ModelSpec::sabr(0.5, -0.5, 0.0).unwrap()
}

/// `(model, x0, y0)` for each reference parameter set.
pub fn reference_models() -> Vec<(ModelSpec, f64, f64)> {
    vec![(cev_ref(), 0.0, 0.0), (heston_ref(), 0.0, LOG_THETA), (sabr_ref(), 0.0, -1.5)]
}

/// Largest coefficient mismatch of two series, relative to the larger of the
/// two coefficients. Where one side is an exact zero the other is measured
/// against the size of the whole term, since cancellation leaves roundoff.
pub fn series_rel_diff(a: &IvSeries, b: &IvSeries) -> f64 {
    let mut worst = ((a.sigma0 - b.sigma0) / a.sigma0).abs();
    assert_eq!(a.terms.len(), b.terms.len(), "orders differ");
    for (pa, pb) in a.terms.iter().zip(&b.terms) {
        let scale = pa.max_abs().max(pb.max_abs());
        let mut keys: Vec<(u32, i32)> = pa.terms().chain(pb.terms()).map(|(k, _)| k).collect();
        keys.sort();
        keys.dedup();
        for (l, t) in keys {
            let (x, y) = (pa.coeff(l, t), pb.coeff(l, t));
            let denom = if x == 0.0 || y == 0.0 { scale } else { x.abs().max(y.abs()) };
            if denom > 0.0 {
                worst = worst.max((x - y).abs() / denom);
            }
        }
    }
    worst
}

fn nonzero_beta(rng: &mut ChaCha8Rng) -> f64 {
    let b: f64 = rng.random_range(0.5..3.5);
    if rng.random_bool(0.5) {
        b
    } else {
        -b
    }
}

/// One random `(model, point)` draw of the given kind.
pub fn random_case(kind: &str, rng: &mut ChaCha8Rng) -> (ModelSpec, MarketPoint) {
    let beta = nonzero_beta(rng);
    match kind {
        "cev" => {
            let m = ModelSpec::cev(rng.random_range(0.1..0.5), rng.random_range(-1.0..1.0)).unwrap();
            (m, MarketPoint::at(0.5, rng.random_range(-0.3..0.3), 0.0, 0.0, 0.0, beta).unwrap())
        }
        "heston" => {
            let theta: f64 = rng.random_range(0.01..0.1);
            let m = ModelSpec::heston(
                rng.random_range(0.5..3.0),
                theta,
                rng.random_range(0.1..0.6),
                rng.random_range(-0.9..0.9),
            )
            .unwrap();
            let y = theta.ln() + rng.random_range(-0.5..0.5);
            (m, MarketPoint::at(0.5, 0.0, y, 0.0, 0.0, beta).unwrap())
        }
        "sabr" => {
            let m =
                ModelSpec::sabr(rng.random_range(0.1..0.8), rng.random_range(-1.0..1.0), rng.random_range(-0.9..0.9))
                    .unwrap();
            let pt = MarketPoint::at(0.5, rng.random_range(-0.3..0.3), rng.random_range(-2.0..-1.0), 0.0, 0.0, beta)
                .unwrap();
            (m, pt)
        }
        "general" => {
            let mut t = TaylorTable::<f64>::zeros(2, (0.0, 0.0));
            for n in 0..=2 {
                for j in 0..=n {
                    let i = n - j;
                    let mut draw = |lo: f64, hi: f64| rng.random_range(lo..hi);
                    let a = if n == 0 { draw(0.01, 0.1) } else { draw(-0.1, 0.1) };
                    let (b, c, f) = (draw(-0.5, 0.5), draw(-0.5, 0.5), draw(-0.2, 0.2));
                    t.set(Coeff::A, i, j, a).unwrap();
                    t.set(Coeff::B, i, j, if n == 0 { b.abs() + 0.05 } else { b }).unwrap();
                    t.set(Coeff::C, i, j, c).unwrap();
                    t.set(Coeff::F, i, j, f).unwrap();
                }
            }
            (ModelSpec::CustomTable(t), MarketPoint::at(0.5, 0.0, 0.0, 0.0, 0.0, beta).unwrap())
        }
        other => panic!("unknown kind {other}"),
    }
}

/// Highest order with a closed form for each kind.
pub fn printed_order(kind: &str) -> usize {
    match kind {
        "general" | "sabr" => 2,
        _ => 3,
    }
}

/// Worst engine-vs-closed-form mismatch over `draws` random cases per kind.
pub fn golden_worst(draws: usize, seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ["general", "cev", "heston", "sabr"]
        .into_iter()
        .map(|kind| {
            let order = printed_order(kind);
            let mut worst: f64 = 0.0;
            for _ in 0..draws {
                let (m, pt) = random_case(kind, &mut rng);
                let e = iv_series(&pt, &m, order, Method::Engine).unwrap();
                let p = iv_series(&pt, &m, order, Method::Printed).unwrap();
                worst = worst.max(series_rel_diff(&e, &p));
            }
            (kind, worst)
        })
        .collect()
}

/// Table with `Y ≡ X`: `a(x, y) = ½δ²e^{(γ-1)(x+y)}`, `b = a`, `c = -a`,
/// `f = 2a`. It describes CEV with the log-spot split across two equal
/// coordinates.
pub fn diagonal_cev_table(delta: f64, gamma: f64, order: usize) -> TaylorTable<f64> {
    let fact = |n: usize| (1..=n).product::<usize>() as f64;
    let mut t = TaylorTable::<f64>::zeros(order, (0.0, 0.0));
    for n in 0..=order {
        for j in 0..=n {
            let i = n - j;
            let v = 0.5 * delta * delta * (gamma - 1.0).powi(n as i32) / (fact(i) * fact(j));
            t.set(Coeff::A, i, j, v).unwrap();
            t.set(Coeff::B, i, j, v).unwrap();
            t.set(Coeff::C, i, j, -v).unwrap();
            t.set(Coeff::F, i, j, 2.0 * v).unwrap();
        }
    }
    t
}

/// Engine and general closed form on the diagonal table against the CEV
/// closed form.
pub fn diagonal_worst(beta: f64) -> (f64, f64) {
    let (d, g) = (0.2, -0.75);
    let t = diagonal_cev_table(d, g, 3);
    let p = MarketPoint::at(0.5, 0.0, 0.0, 0.0, 0.0, beta).unwrap();
    let cev = iv_series(&p, &cev_ref(), 3, Method::Printed).unwrap();
    let engine = iv_series_engine(&p, &t, 3).unwrap();
    let general = iv_series_general(&t, beta, 2).unwrap();
    (series_rel_diff(&engine, &cev), series_rel_diff(&general, &cev.truncate(2)))
}
