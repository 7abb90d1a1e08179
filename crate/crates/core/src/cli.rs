//! Command-line front end: smiles, approximation-vs-exact comparisons and
//! convergence fits written as CSV/JSON.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;

use crate::blackscholes::Payoff;
use crate::error::{Error, Result};
use crate::expansion::{iv_series, price_un, Method, MAX_IV_ORDER};
use crate::models::{taylor_table, MarketPoint, ModelFile, ModelSpec};
use crate::oracles::{
    fourier_implied_smile, heston_fourier_price, simulate_paths, smile_from_paths, FourierConfig, McConfig,
};
use crate::scaling::{fmt_sig, SmileCurve, SmileMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Smile,
    Compare,
    Convergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Engine,
    Printed,
    Mc,
    Fourier,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "letf-smile", version, about = "Implied-vol smiles of leveraged ETF options")]
pub struct Args {
    /// Model parameter file (`key = value` lines)
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum, default_value_t = Command::Smile)]
    pub command: Command,
    #[arg(long, value_enum, default_value_t = MethodArg::Engine)]
    pub method: MethodArg,
    /// Expansion order
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    /// Leverage ratio; falls back to the model file, then 1
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Times to maturity, comma separated
    #[arg(long, value_delimiter = ',', default_value = "0.25", allow_negative_numbers = true)]
    pub tau: Vec<f64>,
    #[arg(long, default_value_t = -0.4, allow_negative_numbers = true)]
    pub lam_min: f64,
    #[arg(long, default_value_t = 0.4, allow_negative_numbers = true)]
    pub lam_max: f64,
    #[arg(long, default_value_t = 41)]
    pub lam_count: usize,
    #[arg(long)]
    pub paths: Option<usize>,
    /// Monte Carlo steps per year
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Validated run settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub model_file: ModelFile,
    pub beta: f64,
    pub taus: Vec<f64>,
    pub lams: Vec<f64>,
    pub order: usize,
    pub method: MethodArg,
    pub mc: McConfig,
    pub fourier: FourierConfig,
    pub out: Option<PathBuf>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config { line: 0, msg: msg.into() }
}

/// `count` evenly spaced points on `[min, max]`.
pub fn lam_grid(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(config_err(format!("--lam-count must be at least 2, got {count}")));
    }
    if !(min < max) || !min.is_finite() || !max.is_finite() {
        return Err(config_err(format!("need --lam-min < --lam-max, got [{min}, {max}]")));
    }
    let h = (max - min) / (count - 1) as f64;
    Ok((0..count).map(|i| if i + 1 == count { max } else { min + h * i as f64 }).collect())
}

impl RunConfig {
    pub fn from_args(args: &Args) -> Result<Self> {
        let model_file = ModelFile::load(&args.config).map_err(|e| match e {
            Error::Io(msg) => config_err(format!("{}: {msg}", args.config.display())),
            other => other,
        })?;
        Self::build(args, model_file)
    }

    pub fn build(args: &Args, model_file: ModelFile) -> Result<Self> {
        let beta = args.beta.or(model_file.beta).unwrap_or(1.0);
        if beta == 0.0 || !beta.is_finite() {
            return Err(config_err(format!("--beta must be a nonzero number, got {beta}")));
        }
        if args.tau.is_empty() || args.tau.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(config_err(format!("--tau needs positive maturities, got {:?}", args.tau)));
        }
        let lams = lam_grid(args.lam_min, args.lam_max, args.lam_count)?;
        let defaults = McConfig::default();
        let mc = McConfig {
            paths: args.paths.unwrap_or(defaults.paths),
            steps_per_year: args.steps.unwrap_or(defaults.steps_per_year),
            seed: args.seed.unwrap_or(defaults.seed),
            ..defaults
        };
        let is_heston = matches!(model_file.model, ModelSpec::Heston(_));
        let max_order = match (args.method, &model_file.model) {
            (MethodArg::Printed, ModelSpec::Sabr { .. }) => 2,
            _ => MAX_IV_ORDER,
        };
        match args.command {
            Command::Smile | Command::Compare => {
                if args.order > max_order {
                    return Err(config_err(format!(
                        "--order {} exceeds the maximum {max_order} for this method",
                        args.order
                    )));
                }
            }
            Command::Convergence => {
                if args.tau.len() < 3 {
                    return Err(config_err("convergence needs at least three maturities in --tau"));
                }
                if !is_heston {
                    return Err(config_err("convergence needs a Heston model (exact prices by Fourier)"));
                }
                if args.order > MAX_IV_ORDER {
                    return Err(config_err(format!("--order {} exceeds {MAX_IV_ORDER}", args.order)));
                }
            }
        }
        let uses_mc = args.method == MethodArg::Mc || (args.command == Command::Compare && !is_heston);
        if uses_mc {
            mc.validate().map_err(|e| config_err(e.to_string()))?;
        }
        if args.method == MethodArg::Fourier && !is_heston {
            return Err(config_err("--method fourier needs a Heston model"));
        }
        Ok(Self {
            command: args.command,
            model_file,
            beta,
            taus: args.tau.clone(),
            lams,
            order: args.order,
            method: args.method,
            mc,
            fourier: FourierConfig::default(),
            out: args.out.clone(),
        })
    }

    pub fn point(&self, tau: f64, beta: f64) -> Result<MarketPoint> {
        let f = &self.model_file;
        MarketPoint::at(tau, f.x0, f.y0, f.z0, 0.0, beta)
    }

    fn model(&self) -> &ModelSpec {
        &self.model_file.model
    }
}

/// Exit status for an error: 2 configuration, 3 numerical, 4 no-arbitrage or
/// inversion failure.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Domain(_) | Error::UnsupportedOrder { .. } | Error::Io(_) => 2,
        Error::NoArbitrage { .. } | Error::SolverFailed { .. } => 4,
        _ => 3,
    }
}

/// Expansion smile of `order` at `(tau, beta)` on `lams`.
pub fn expansion_smile(cfg: &RunConfig, tau: f64, beta: f64, method: Method) -> Result<SmileCurve> {
    let series = iv_series(&cfg.point(tau, beta)?, cfg.model(), cfg.order, method)?;
    let tag = match method {
        Method::Engine => "engine",
        Method::Printed => "printed",
    };
    let meta =
        SmileMeta { model: cfg.model().kind_name().into(), beta, tau, method: format!("{tag} order {}", cfg.order) };
    let curve = SmileCurve::from_fn(&cfg.lams, meta, |lam| series.eval_order(lam, tau, cfg.order))?;
    if curve.points().iter().any(|p| !(p.iv > 0.0)) {
        return Err(Error::Numerical(format!("expansion smile not positive at tau = {tau}")));
    }
    Ok(curve)
}

/// Exact smiles (from one batch for Monte Carlo) at each requested leverage.
fn exact_smiles(cfg: &RunConfig, tau: f64, betas: &[f64], method: MethodArg) -> Result<Vec<SmileCurve>> {
    match (method, cfg.model()) {
        (MethodArg::Fourier, ModelSpec::Heston(p)) => {
            betas.iter().map(|&b| fourier_implied_smile(p, &cfg.point(tau, b)?, &cfg.lams, &cfg.fourier)).collect()
        }
        (MethodArg::Fourier, _) => Err(config_err("--method fourier needs a Heston model")),
        _ => {
            let point = cfg.point(tau, 1.0)?;
            let paths = simulate_paths(cfg.model(), &point, &cfg.mc)?;
            if paths.absorbed() > 0 {
                log::warn!("{} of {} paths absorbed at tau = {tau}", paths.absorbed(), paths.ends.len());
            }
            betas.iter().map(|&b| smile_from_paths(&paths, cfg.model().kind_name(), point.z, b, &cfg.lams)).collect()
        }
    }
}

fn smile_for(cfg: &RunConfig, tau: f64) -> Result<SmileCurve> {
    match cfg.method {
        MethodArg::Engine => expansion_smile(cfg, tau, cfg.beta, Method::Engine),
        MethodArg::Printed => expansion_smile(cfg, tau, cfg.beta, Method::Printed),
        m => Ok(exact_smiles(cfg, tau, &[cfg.beta], m)?.remove(0)),
    }
}

/// Output path for maturity `tau` when several are written.
fn per_tau_path(out: &Path, tau: f64) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("smile");
    let name = match out.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_tau{}.{ext}", fmt_sig(tau)),
        None => format!("{stem}_tau{}", fmt_sig(tau)),
    };
    out.with_file_name(name)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Writes one smile CSV per maturity (suffixed `_tau<τ>` when there are several).
pub fn cmd_smile(cfg: &RunConfig) -> Result<Vec<SmileCurve>> {
    let mut curves = Vec::new();
    for &tau in &cfg.taus {
        let curve = smile_for(cfg, tau)?;
        if !curve.excluded.is_empty() {
            log::warn!("tau = {tau}: strikes {:?} excluded", curve.excluded);
        }
        let path = cfg.out.as_ref().map(|o| if cfg.taus.len() > 1 { per_tau_path(o, tau) } else { o.clone() });
        emit(path.as_deref(), &curve.to_csv())?;
        curves.push(curve);
    }
    Ok(curves)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareTau {
    pub tau: f64,
    pub points: usize,
    pub excluded: Vec<f64>,
    pub max_gap_approx: f64,
    pub max_gap_beta1_scaled: f64,
    pub max_gap_exact_scaled: Option<f64>,
    pub max_half_width: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareSummary {
    pub model: String,
    pub beta: f64,
    pub order: usize,
    pub exact_method: MethodArg,
    pub approx_method: MethodArg,
    pub maturities: Vec<CompareTau>,
    pub max_gap_approx: f64,
}

/// Aligned table of exact, approximate, unleveraged and scaled smiles at
/// each maturity, plus a JSON summary next to the CSV.
pub fn cmd_compare(cfg: &RunConfig) -> Result<CompareSummary> {
    let is_heston = matches!(cfg.model(), ModelSpec::Heston(_));
    let exact_method = match cfg.method {
        MethodArg::Mc | MethodArg::Fourier => cfg.method,
        _ if is_heston => MethodArg::Fourier,
        _ => MethodArg::Mc,
    };
    let (approx_method, method) = match cfg.method {
        MethodArg::Printed => (MethodArg::Printed, Method::Printed),
        _ => (MethodArg::Engine, Method::Engine),
    };
    let beta = cfg.beta;
    let mut csv = String::from(
        "tau,lam,iv_exact,iv_exact_half_width,iv_approx,iv_beta1,iv_beta1_scaled,iv_exact_beta1_scaled,gap_approx,gap_beta1_scaled,gap_exact_scaled\n",
    );
    let mut maturities = Vec::new();
    for &tau in &cfg.taus {
        let approx = iv_series(&cfg.point(tau, beta)?, cfg.model(), cfg.order, method)?;
        let approx1 = iv_series(&cfg.point(tau, 1.0)?, cfg.model(), cfg.order, method)?;
        let mut exact = exact_smiles(cfg, tau, &[beta, 1.0], exact_method)?;
        let exact1 = exact.pop().expect("two smiles");
        let exact = exact.pop().expect("two smiles");
        let exact1_scaled = exact1.scale_x_to_z(beta)?;
        let (lo, hi) = exact1_scaled.range();
        if cfg.lams.iter().all(|l| *l < lo || *l > hi) {
            return Err(Error::EmptyOverlap);
        }
        let mut row = CompareTau {
            tau,
            points: 0,
            excluded: exact.excluded.clone(),
            max_gap_approx: 0.0,
            max_gap_beta1_scaled: 0.0,
            max_gap_exact_scaled: None,
            max_half_width: None,
        };
        for p in exact.points() {
            let lam = p.lam;
            let iv_approx = approx.eval_order(lam, tau, cfg.order);
            let iv_beta1 = approx1.eval_order(lam, tau, cfg.order);
            let iv_beta1_scaled = beta.abs() * approx1.eval_order(lam / beta, tau, cfg.order);
            let exact_scaled = exact1_scaled.eval(lam).ok();
            let (g1, g2) = (iv_approx - p.iv, iv_beta1_scaled - p.iv);
            let g3 = exact_scaled.map(|v| v - p.iv);
            row.points += 1;
            row.max_gap_approx = row.max_gap_approx.max(g1.abs());
            row.max_gap_beta1_scaled = row.max_gap_beta1_scaled.max(g2.abs());
            if let Some(g) = g3 {
                row.max_gap_exact_scaled = Some(row.max_gap_exact_scaled.unwrap_or(0.0).max(g.abs()));
            }
            if let Some(h) = p.iv_half_width {
                row.max_half_width = Some(row.max_half_width.unwrap_or(0.0).max(h));
            }
            let opt = |v: Option<f64>| v.map(fmt_sig).unwrap_or_default();
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{},{}",
                fmt_sig(tau),
                fmt_sig(lam),
                fmt_sig(p.iv),
                opt(p.iv_half_width),
                fmt_sig(iv_approx),
                fmt_sig(iv_beta1),
                fmt_sig(iv_beta1_scaled),
                opt(exact_scaled),
                fmt_sig(g1),
                fmt_sig(g2),
                opt(g3)
            );
        }
        maturities.push(row);
    }
    let summary = CompareSummary {
        model: cfg.model().kind_name().into(),
        beta,
        order: cfg.order,
        exact_method,
        approx_method,
        max_gap_approx: maturities.iter().map(|m| m.max_gap_approx).fold(0.0, f64::max),
        maturities,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Numerical(e.to_string()))?;
    match &cfg.out {
        Some(p) => {
            emit(Some(p), &csv)?;
            emit(Some(&p.with_extension("json")), &(json + "\n"))?;
        }
        None => {
            print!("{csv}");
            eprintln!("{json}");
        }
    }
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub tau: f64,
    pub order: usize,
    pub exact: f64,
    pub approx: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `ln |error|` against `ln τ`, one per order.
    pub slopes: Vec<f64>,
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Price errors `|u_exact - ū_N|` of the call at `point.k` over `taus` for
/// `N = 0..=max_order`, with Fourier prices as the exact values.
pub fn convergence_report(
    model: &ModelSpec,
    point: &MarketPoint,
    taus: &[f64],
    max_order: usize,
    fourier: &FourierConfig,
) -> Result<ConvergenceReport> {
    let ModelSpec::Heston(params) = model else {
        return Err(config_err("convergence needs a Heston model"));
    };
    let mut rows = Vec::new();
    let table = taylor_table(model, (point.x, point.y), max_order)?;
    for &tau in taus {
        let pt = point.with_tau(tau);
        let exact = heston_fourier_price(params, &pt, fourier, Payoff::Call)?;
        let full = price_un(&pt, &table, max_order, Payoff::Call)?;
        let mut approx = full.u0;
        for order in 0..=max_order {
            if order > 0 {
                approx += full.terms[order - 1];
            }
            rows.push(ConvergenceRow { tau, order, exact, approx, abs_error: (exact - approx).abs() });
        }
    }
    let slopes = (0..=max_order)
        .map(|n| {
            let (xs, ys): (Vec<f64>, Vec<f64>) =
                rows.iter().filter(|r| r.order == n).map(|r| (r.tau.ln(), r.abs_error.ln())).unzip();
            fit_slope(&xs, &ys)
        })
        .collect();
    Ok(ConvergenceReport { rows, slopes })
}

pub fn cmd_convergence(cfg: &RunConfig) -> Result<ConvergenceReport> {
    let point = cfg.point(cfg.taus[0], cfg.beta)?;
    let report = convergence_report(cfg.model(), &point, &cfg.taus, cfg.order, &cfg.fourier)?;
    let mut csv = String::from("tau,order,exact,approx,abs_error\n");
    for r in &report.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            fmt_sig(r.tau),
            r.order,
            fmt_sig(r.exact),
            fmt_sig(r.approx),
            fmt_sig(r.abs_error)
        );
    }
    let mut slopes = String::from("order,slope\n");
    for (n, s) in report.slopes.iter().enumerate() {
        let _ = writeln!(slopes, "{n},{}", fmt_sig(*s));
    }
    match &cfg.out {
        Some(p) => {
            emit(Some(p), &csv)?;
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("convergence");
            emit(Some(&p.with_file_name(format!("{stem}_slopes.csv"))), &slopes)?;
        }
        None => print!("{csv}\n{slopes}"),
    }
    Ok(report)
}

pub fn run(args: &Args) -> Result<()> {
    let cfg = RunConfig::from_args(args)?;
    match cfg.command {
        Command::Smile => cmd_smile(&cfg).map(|_| ()),
        Command::Compare => cmd_compare(&cfg).map(|_| ()),
        Command::Convergence => cmd_convergence(&cfg).map(|_| ()),
    }
}

/// Parses `argv`, runs, and returns the process exit status.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(extra: &[&str]) -> Args {
        let mut v = vec!["letf-smile", "--config", "unused.cfg"];
        v.extend_from_slice(extra);
        Args::try_parse_from(v).unwrap()
    }

    fn heston_file() -> ModelFile {
        ModelFile::parse("kind = heston\nkappa = 1.15\ntheta = 0.04\ndelta = 0.2\nrho = -0.4\n").unwrap()
    }

    #[test]
    fn grid_endpoints_and_count() {
        let g = lam_grid(-0.4, 0.4, 41).unwrap();
        assert_eq!(g.len(), 41);
        assert_eq!((g[0], g[40]), (-0.4, 0.4));
        assert!((g[20]).abs() < 1e-15);
        assert!(lam_grid(0.0, 1.0, 1).is_err());
        assert!(lam_grid(1.0, 0.0, 5).is_err());
    }

    #[test]
    fn defaults_and_negative_values() {
        let a = args(&["--beta", "-2", "--tau", "0.1,0.2", "--lam-min", "-0.2"]);
        assert_eq!(a.command, Command::Smile);
        assert_eq!(a.method, MethodArg::Engine);
        assert_eq!((a.order, a.lam_count, a.lam_max), (3, 41, 0.4));
        assert_eq!(a.tau, vec![0.1, 0.2]);
        let cfg = RunConfig::build(&a, heston_file()).unwrap();
        assert_eq!(cfg.beta, -2.0);
        assert_eq!(cfg.lams[0], -0.2);
    }

    #[test]
    fn validation_errors_are_config_errors() {
        let bad = [
            args(&["--beta", "0"]),
            args(&["--lam-count", "1"]),
            args(&["--command", "convergence", "--tau", "0.1,0.2"]),
            args(&["--order", "4"]),
            args(&["--tau", "-1"]),
            args(&["--method", "mc", "--paths", "3"]),
        ];
        for a in &bad {
            let e = RunConfig::build(a, heston_file()).unwrap_err();
            assert_eq!(exit_code(&e), 2, "{a:?}: {e}");
        }
        let sabr = ModelFile::parse("kind = sabr\ndelta = 0.5\ngamma = -0.5\nrho = 0\n").unwrap();
        assert!(RunConfig::build(&args(&["--method", "printed", "--order", "3"]), sabr.clone()).is_err());
        assert!(RunConfig::build(&args(&["--method", "fourier"]), sabr).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::NoArbitrage { price: 2.0, lower: 0.0, upper: 1.0 }), 4);
        assert_eq!(exit_code(&Error::Quadrature("x".into())), 3);
        assert_eq!(exit_code(&Error::EmptyOverlap), 3);
        assert_eq!(exit_code(&Error::Config { line: 3, msg: "x".into() }), 2);
    }

    #[test]
    fn slope_of_power_law() {
        let xs: Vec<f64> = [0.05f64, 0.1, 0.2, 0.4].iter().map(|t| t.ln()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 * x + 0.3).collect();
        assert!((fit_slope(&xs, &ys) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn per_tau_names() {
        assert_eq!(per_tau_path(Path::new("out/s.csv"), 0.25), PathBuf::from("out/s_tau0.25.csv"));
        assert_eq!(per_tau_path(Path::new("s"), 1.0), PathBuf::from("s_tau1"));
    }
}
