//! Sampled smiles, log-moneyness scaling between ETF and LETF surfaces, and
//! smile comparison.
//!
//! `σ_X^(β)(λ) = |β| σ_X(λ/β)` puts an ETF smile on the LETF scale and
//! `σ_Z^(1/β)(λ) = σ_Z(βλ)/|β|` brings an LETF smile back. For small `τ`
//! the two sides nearly coincide; the tolerances used in tests are our own.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Labels carried by a smile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmileMeta {
    pub model: String,
    pub beta: f64,
    pub tau: f64,
    pub method: String,
}

/// One sampled point. Oracle smiles also carry confidence information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmilePoint {
    pub lam: f64,
    pub iv: f64,
    pub iv_half_width: Option<f64>,
    pub price: Option<f64>,
    pub price_se: Option<f64>,
}

impl SmilePoint {
    pub fn new(lam: f64, iv: f64) -> Self {
        Self { lam, iv, iv_half_width: None, price: None, price_se: None }
    }
}

/// Smile sampled on a strictly increasing `λ` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmileCurve {
    points: Vec<SmilePoint>,
    pub meta: SmileMeta,
    /// Grid points dropped because the oracle could not produce a usable vol.
    pub excluded: Vec<f64>,
}

impl SmileCurve {
    pub fn new(points: Vec<SmilePoint>, meta: SmileMeta) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Domain("a smile needs at least two points".into()));
        }
        for w in points.windows(2) {
            if !(w[1].lam > w[0].lam) {
                return Err(Error::Domain(format!("lambda grid not strictly increasing at {}", w[1].lam)));
            }
        }
        if let Some(p) = points.iter().find(|p| !(p.iv > 0.0) || !p.iv.is_finite()) {
            return Err(Error::Domain(format!("non-positive implied vol {} at lambda {}", p.iv, p.lam)));
        }
        Ok(Self { points, meta, excluded: Vec::new() })
    }

    /// Samples `f` on `lams`.
    pub fn from_fn(lams: &[f64], meta: SmileMeta, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(lams.iter().map(|&l| SmilePoint::new(l, f(l))).collect(), meta)
    }

    pub fn points(&self) -> &[SmilePoint] {
        &self.points
    }

    pub fn lams(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lam).collect()
    }

    pub fn ivs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.iv).collect()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.points[0].lam, self.points[self.points.len() - 1].lam)
    }

    /// Monotone cubic interpolation; no extrapolation.
    pub fn eval(&self, lam: f64) -> Result<f64> {
        let (min, max) = self.range();
        if !(lam >= min && lam <= max) {
            return Err(Error::OutOfRange { lam, min, max });
        }
        Ok(MonotoneCubic::new(&self.lams(), &self.ivs()).eval(lam))
    }

    /// `σ_X^(β)`: points move to `βλ` and scale by `|β|`.
    pub fn scale_x_to_z(&self, beta: f64) -> Result<Self> {
        self.transform(beta, |lam| beta * lam, beta.abs(), &format!("{} (scaled {beta})", self.meta.method))
    }

    /// `σ_Z^(1/β)`: points move to `λ/β` and scale by `1/|β|`.
    pub fn scale_z_to_x(&self, beta: f64) -> Result<Self> {
        self.transform(beta, |lam| lam / beta, 1.0 / beta.abs(), &format!("{} (scaled 1/{beta})", self.meta.method))
    }

    fn transform(&self, beta: f64, map: impl Fn(f64) -> f64, factor: f64, method: &str) -> Result<Self> {
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::Domain("leverage ratio beta must be nonzero".into()));
        }
        let mut pts: Vec<SmilePoint> = self
            .points
            .iter()
            .map(|p| SmilePoint {
                lam: map(p.lam),
                iv: factor * p.iv,
                iv_half_width: p.iv_half_width.map(|h| factor * h),
                ..*p
            })
            .collect();
        pts.sort_by(|a, b| a.lam.total_cmp(&b.lam));
        let mut out = Self::new(pts, SmileMeta { method: method.to_string(), ..self.meta.clone() })?;
        out.excluded = self.excluded.iter().map(|&l| map(l)).collect();
        Ok(out)
    }

    /// CSV with columns `lam, iv, iv_half_width, price, price_se`; missing
    /// values are left empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lam,iv,iv_half_width,price,price_se\n");
        for p in &self.points {
            let opt = |v: Option<f64>| v.map(fmt_sig).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                fmt_sig(p.lam),
                fmt_sig(p.iv),
                opt(p.iv_half_width),
                opt(p.price),
                opt(p.price_se)
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    /// Reads the CSV written by [`SmileCurve::to_csv`].
    pub fn from_csv(text: &str, meta: SmileMeta) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "lam,iv,iv_half_width,price,price_se" => {}
            _ => return Err(Error::Config { line: 1, msg: "unexpected CSV header".into() }),
        }
        let mut pts = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(Error::Config { line: i + 1, msg: format!("expected 5 columns, found {}", cols.len()) });
            }
            let num = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| Error::Config { line: i + 1, msg: format!("bad number '{s}'") })
                }
            };
            let lam = num(cols[0])?.ok_or(Error::Config { line: i + 1, msg: "missing lam".into() })?;
            let iv = num(cols[1])?.ok_or(Error::Config { line: i + 1, msg: "missing iv".into() })?;
            pts.push(SmilePoint {
                lam,
                iv,
                iv_half_width: num(cols[2])?,
                price: num(cols[3])?,
                price_se: num(cols[4])?,
            });
        }
        Self::new(pts, meta)
    }
}

/// Formats with 10 significant digits.
pub fn fmt_sig(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let rounded: f64 = format!("{v:.9e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

/// `λ ↦ |β| σ_X(λ/β)`.
pub fn scale_x_to_z(sigma_x: impl Fn(f64) -> f64, beta: f64) -> impl Fn(f64) -> f64 {
    move |lam| beta.abs() * sigma_x(lam / beta)
}

/// `λ ↦ σ_Z(βλ)/|β|`.
pub fn scale_z_to_x(sigma_z: impl Fn(f64) -> f64, beta: f64) -> impl Fn(f64) -> f64 {
    move |lam| sigma_z(beta * lam) / beta.abs()
}

/// Number of grid points used by [`smile_distance`].
pub const DISTANCE_GRID: usize = 101;

/// Largest absolute vol gap on a uniform grid over the common `λ` range,
/// optionally clipped to `lam_range`.
pub fn smile_distance(a: &SmileCurve, b: &SmileCurve, lam_range: Option<(f64, f64)>) -> Result<f64> {
    let (a0, a1) = a.range();
    let (b0, b1) = b.range();
    let (mut lo, mut hi) = (a0.max(b0), a1.min(b1));
    if let Some((r0, r1)) = lam_range {
        lo = lo.max(r0);
        hi = hi.min(r1);
    }
    if !(hi > lo) {
        return Err(Error::EmptyOverlap);
    }
    let ia = MonotoneCubic::new(&a.lams(), &a.ivs());
    let ib = MonotoneCubic::new(&b.lams(), &b.ivs());
    Ok((0..DISTANCE_GRID)
        .map(|i| {
            let lam = lo + (hi - lo) * i as f64 / (DISTANCE_GRID - 1) as f64;
            (ia.eval(lam) - ib.eval(lam)).abs()
        })
        .fold(0.0, f64::max))
}

/// Shape-preserving piecewise cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    /// `xs` strictly increasing, at least two points.
    pub fn new(xs: &[f64], ys: &[f64]) -> Self {
        assert!(xs.len() >= 2 && xs.len() == ys.len());
        let n = xs.len();
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])).collect();
        let mut m = vec![0.0; n];
        m[0] = delta[0];
        m[n - 1] = delta[n - 2];
        for i in 1..n - 1 {
            m[i] = if delta[i - 1] * delta[i] <= 0.0 { 0.0 } else { 0.5 * (delta[i - 1] + delta[i]) };
        }
        for i in 0..n - 1 {
            if delta[i] == 0.0 {
                m[i] = 0.0;
                m[i + 1] = 0.0;
                continue;
            }
            let a = m[i] / delta[i];
            let b = m[i + 1] / delta[i];
            let s = a * a + b * b;
            if s > 9.0 {
                let t = 3.0 / s.sqrt();
                m[i] = t * a * delta[i];
                m[i + 1] = t * b * delta[i];
            }
        }
        Self { xs: xs.to_vec(), ys: ys.to_vec(), slopes: m }
    }

    /// Clamps to the end values outside the sampled range.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.xs.partition_point(|&v| v <= x) - 1;
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.ys[i]
            + (t3 - 2.0 * t2 + t) * h * self.slopes[i]
            + (-2.0 * t3 + 3.0 * t2) * self.ys[i + 1]
            + (t3 - t2) * h * self.slopes[i + 1]
    }
}
