//! Command-line front end: config ingestion, single-point reports, parameter
//! sweeps, and the identity-suite runner.
//!
//! Subcommands:
//!
//! * `ness-chain currents --config <path> [--out <path>] [--format csv|json]`
//! * `ness-chain sweep --config <path> --var lambda2 --from 0 --to 40 --steps 80 [--out <path>]`
//!   (`--var/--from/--to/--steps` may be given twice for a 2-D grid; rows are
//!   emitted in lexicographic sweep order, outer variable first)
//! * `ness-chain verify --config <path>`
//!
//! The config is a single flat JSON document; every physical quantity has an
//! explicit key, in units ħ = k_B = mass = 1. `NESS_CHAIN_THREADS` caps the
//! worker pool. CSV output is UTF-8, comma-separated, LF line endings, floats
//! printed with 17 significant digits so identical configs produce
//! byte-identical files.
//!
//! Exit codes: 0 success, 2 config error, 3 quadrature/numerical failure,
//! 4 identity-suite failure.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath_kernels::{default_cutoff, BathSet, CutoffKind};
use crate::chain_model::{ChainModel, NonlinearityKind, NonlinearitySpec};
use crate::currents::{
    balance_integrand_residual, kernel_identity_residuals, ness_report, zeroth_order,
    CurrentReport,
};
use crate::propagators::propagator_identity_residuals;
use crate::spectral_integrals::{build_kernel_table, QuadratureSpec};
use crate::{Error, Result};

/// Flat JSON run configuration. Optional keys fall back to the documented
/// defaults (`cutoff`: 50 × the top chain resonance; quadrature tolerances:
/// the production defaults of the spectral layer).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_n_sites")]
    pub n_sites: usize,
    pub omega_r: f64,
    pub lambda2: f64,
    pub gamma: f64,
    /// Temperature of the bath at site 0.
    pub t_hot: f64,
    /// Temperature of the baths at every other site.
    pub t_cold: f64,
    #[serde(default)]
    pub cutoff: Option<f64>,
    #[serde(default = "default_cutoff_kind")]
    pub cutoff_kind: CutoffKind,
    pub nonlinearity: NonlinearityKind,
    pub strength: f64,
    #[serde(default)]
    pub rel_tol: Option<f64>,
    #[serde(default)]
    pub abs_tol: Option<f64>,
    #[serde(default)]
    pub max_subdivisions: Option<usize>,
}

fn default_n_sites() -> usize {
    2
}
fn default_cutoff_kind() -> CutoffKind {
    CutoffKind::Hard
}

/// A fully validated problem instance built from a [`RunConfig`].
pub struct Instance {
    pub model: ChainModel,
    pub baths: BathSet,
    pub nonlinearity: NonlinearitySpec,
    pub quad: QuadratureSpec,
}

impl RunConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("cannot parse {}: {e}", path.display())))
    }

    /// Validates every field and builds the model, baths, nonlinearity and
    /// quadrature spec.
    pub fn build(&self) -> Result<Instance> {
        let model = ChainModel::new(self.n_sites, self.omega_r, self.lambda2, self.gamma)?;
        let mut temps = vec![self.t_cold; self.n_sites];
        temps[0] = self.t_hot;
        let cutoff = self.cutoff.unwrap_or_else(|| default_cutoff(&model));
        let baths = BathSet::from_temperatures(&temps, cutoff, self.cutoff_kind, &model)?;
        let nonlinearity = NonlinearitySpec::new(self.nonlinearity, self.strength)?;
        let mut quad = QuadratureSpec::default_for(&model, &baths);
        if let Some(v) = self.rel_tol {
            quad.rel_tol = v;
        }
        if let Some(v) = self.abs_tol {
            quad.abs_tol = v;
        }
        if let Some(v) = self.max_subdivisions {
            quad.max_subdivisions = v;
        }
        quad.validate()?;
        Ok(Instance { model, baths, nonlinearity, quad })
    }
}

/// Report wrapper adding a provenance block (config echo, resolved cutoff,
/// tolerances, library version) for reproducibility.
#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub provenance: Provenance,
    pub report: CurrentReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub version: String,
    pub config: RunConfig,
    pub cutoff_used: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

/// Computes the full current report for one configuration.
pub fn run_currents(config: &RunConfig) -> Result<ReportDocument> {
    let inst = config.build()?;
    let report = ness_report(&inst.model, &inst.baths, &inst.nonlinearity, &inst.quad)?;
    Ok(ReportDocument {
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            cutoff_used: inst.baths.cutoff,
            rel_tol: inst.quad.rel_tol,
            abs_tol: inst.quad.abs_tol,
        },
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Deterministic two-column CSV rendering of a current report.
pub fn currents_csv(doc: &ReportDocument) -> String {
    let mut rows: Vec<(String, String)> = vec![("version".into(), doc.provenance.version.clone())];
    let num = |k: &str, v: f64| (k.to_string(), fmt_float(v));
    rows.push(num("cutoff_used", doc.provenance.cutoff_used));
    let r = &doc.report;
    for (n, v) in r.zeroth.p_xi.iter().enumerate() {
        rows.push(num(&format!("p0_xi_{n}"), *v));
    }
    for (n, v) in r.zeroth.p_gamma.iter().enumerate() {
        rows.push(num(&format!("p0_gamma_{n}"), *v));
    }
    for (n, row) in r.zeroth.p_pair.iter().enumerate() {
        for (nu, v) in row.iter().enumerate() {
            if n != nu && *v != 0.0 || (n as i64 - nu as i64).abs() == 1 {
                rows.push(num(&format!("p0_pair_{n}_{nu}"), *v));
            }
        }
    }
    for (n, v) in r.zeroth.balance_residual.iter().enumerate() {
        rows.push(num(&format!("balance0_{n}"), *v));
    }
    for (n, v) in r.first.p_xi.iter().enumerate() {
        rows.push(num(&format!("p1_xi_{n}"), *v));
    }
    for (n, v) in r.first.p_gamma.iter().enumerate() {
        rows.push(num(&format!("p1_gamma_{n}"), *v));
    }
    for (n, row) in r.first.p_pair_quadratic.iter().enumerate() {
        for (nu, v) in row.iter().enumerate() {
            if (n as i64 - nu as i64).abs() == 1 {
                rows.push(num(&format!("p1_pair_quadratic_{n}_{nu}"), *v));
                rows.push(num(&format!("p1_pair_quartic_{n}_{nu}"), r.first.p_pair_quartic[n][nu]));
            }
        }
    }
    for (n, v) in r.balance_residual_first.iter().enumerate() {
        rows.push(num(&format!("balance1_{n}"), *v));
    }
    rows.push(num("ratio", r.ratio));
    rows.push(("perturbative_validity".into(), r.perturbative_validity.to_string()));

    let mut out = String::from("field,value\n");
    for (k, v) in rows {
        out.push_str(&k);
        out.push(',');
        out.push_str(&v);
        out.push('\n');
    }
    out
}

/// Variables that can be swept over a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepVar {
    Lambda2,
    Strength,
    Gamma,
    TCold,
}

impl SweepVar {
    fn name(self) -> &'static str {
        match self {
            SweepVar::Lambda2 => "lambda2",
            SweepVar::Strength => "strength",
            SweepVar::Gamma => "gamma",
            SweepVar::TCold => "t_cold",
        }
    }
    fn apply(self, config: &mut RunConfig, value: f64) {
        match self {
            SweepVar::Lambda2 => config.lambda2 = value,
            SweepVar::Strength => config.strength = value,
            SweepVar::Gamma => config.gamma = value,
            SweepVar::TCold => config.t_cold = value,
        }
    }
}

/// One axis of a sweep: `points` evenly spaced values from `from` to `to`
/// inclusive (`points = 1` uses `from` alone).
#[derive(Debug, Clone, Copy)]
pub struct SweepAxis {
    pub var: SweepVar,
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

impl SweepAxis {
    fn values(&self) -> Result<Vec<f64>> {
        if self.points == 0 {
            return Err(Error::Config("sweep range must contain at least one point".into()));
        }
        if self.points == 1 {
            return Ok(vec![self.from]);
        }
        if !(self.to > self.from) {
            return Err(Error::Config(format!(
                "sweep over {} needs a positive step: from {} to {}",
                self.var.name(),
                self.from,
                self.to
            )));
        }
        let step = (self.to - self.from) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| self.from + step * i as f64).collect())
    }
}

/// Runs a 1-D or 2-D sweep and renders the CSV table. Points are dispatched
/// to the worker pool; rows are assembled in lexicographic grid order
/// regardless of completion order. Per-point failures are recorded in the
/// `error` column and the sweep continues.
pub fn run_sweep(base: &RunConfig, axes: &[SweepAxis]) -> Result<String> {
    if axes.is_empty() || axes.len() > 2 {
        return Err(Error::Config(format!(
            "sweep takes one or two variables, got {}",
            axes.len()
        )));
    }
    base.build()?; // validate the base config up front
    let grids: Vec<Vec<f64>> = axes.iter().map(|a| a.values()).collect::<Result<_>>()?;

    // Lexicographic grid, outer axis first.
    let mut points: Vec<Vec<f64>> = Vec::new();
    match grids.len() {
        1 => {
            for &v in &grids[0] {
                points.push(vec![v]);
            }
        }
        _ => {
            for &v0 in &grids[0] {
                for &v1 in &grids[1] {
                    points.push(vec![v0, v1]);
                }
            }
        }
    }

    let rows: Vec<String> = points
        .par_iter()
        .map(|values| {
            let mut cfg = base.clone();
            for (axis, &v) in axes.iter().zip(values.iter()) {
                axis.var.apply(&mut cfg, v);
            }
            let mut cells: Vec<String> = values.iter().map(|&v| fmt_float(v)).collect();
            match run_currents(&cfg) {
                Ok(doc) => {
                    let r = &doc.report;
                    let (p1q, p1f) = if cfg.n_sites > 1 {
                        (r.first.p_pair_quadratic[1][0], r.first.p_pair_quartic[1][0])
                    } else {
                        (0.0, 0.0)
                    };
                    let p0 = if cfg.n_sites > 1 { r.zeroth.p_pair[1][0] } else { 0.0 };
                    let bal0 =
                        r.zeroth.balance_residual.iter().cloned().fold(0.0, f64::max);
                    let bal1 =
                        r.balance_residual_first.iter().cloned().fold(0.0, f64::max);
                    for v in [p0, p1q, p1f, p1q + p1f, r.ratio, r.ratio.abs(), bal0, bal1] {
                        cells.push(fmt_float(v));
                    }
                    cells.push(String::new());
                }
                Err(e) => {
                    for _ in 0..8 {
                        cells.push(String::new());
                    }
                    cells.push(e.to_string().replace([',', '\n'], ";"));
                }
            }
            cells.join(",")
        })
        .collect();

    let mut header: Vec<String> = axes.iter().map(|a| a.var.name().to_string()).collect();
    for c in [
        "p0_pair",
        "p1_pair_quadratic",
        "p1_pair_quartic",
        "p1_pair_total",
        "ratio",
        "abs_ratio",
        "balance0_max",
        "balance1_max",
        "error",
    ] {
        header.push(c.to_string());
    }
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    Ok(out)
}

/// One entry of the identity-suite report.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<IdentityCheck>,
    pub all_pass: bool,
}

fn check(name: &str, residual: f64, tolerance: f64) -> IdentityCheck {
    IdentityCheck {
        name: name.to_string(),
        max_residual: residual,
        tolerance,
        pass: residual < tolerance,
    }
}

/// Runs every pointwise and integrated identity for the configured model.
pub fn run_verify(config: &RunConfig) -> Result<VerifyReport> {
    let inst = config.build()?;
    let model = &inst.model;
    let w = inst.baths.integration_halfwidth();
    let grid: Vec<f64> = (0..=1000).map(|i| -w + 2.0 * w * i as f64 / 1000.0).collect();

    let mut checks = Vec::new();

    let prop = propagator_identity_residuals(model, &grid);
    checks.push(check("propagator_conjugate_symmetry", prop.conjugate_symmetry, 1e-12));
    checks.push(check("propagator_matrix_symmetry", prop.matrix_symmetry, 1e-12));
    checks.push(check("propagator_diagonal_equality", prop.diagonal_equality, 1e-12));
    checks.push(check("propagator_resolvent_identity", prop.resolvent_identity, 1e-12));
    checks.push(check("propagator_resolvent_companion", prop.resolvent_companion, 1e-12));

    let balance_pw = grid
        .iter()
        .flat_map(|&omega| balance_integrand_residual(model, omega))
        .fold(0.0, f64::max);
    checks.push(check("zeroth_balance_pointwise", balance_pw, 1e-12));

    if model.n_sites == 2 {
        let mut kv = 0.0_f64;
        let mut lv = 0.0_f64;
        let mut kc = 0.0_f64;
        let mut lc = 0.0_f64;
        for &omega in &grid {
            let r = kernel_identity_residuals(model, omega);
            kv = kv.max(r.k_vanishing);
            lv = lv.max(r.l_vanishing);
            kc = kc.max(r.k_closed_form);
            lc = lc.max(r.l_closed_form);
        }
        checks.push(check("kernel_k_vanishing", kv, 1e-12));
        checks.push(check("kernel_l_vanishing", lv, 1e-12));
        checks.push(check("kernel_k_closed_form", kc, 1e-12));
        checks.push(check("kernel_l_closed_form", lc, 1e-12));
    }

    let z = zeroth_order(model, &inst.baths, &inst.quad)?;
    let bal_int = (0..model.n_sites)
        .map(|n| z.balance_residual[n] / z.p_inter[n].abs().max(1e-300))
        .fold(0.0, f64::max);
    checks.push(check("zeroth_balance_integrated_relative", bal_int, 1e-6));

    let table = build_kernel_table(model, &inst.baths, &inst.quad)?;
    let scale = table.l_norm().max(1e-300);
    let odd = (0..model.n_sites).map(|n| table.l(n, n).norm()).fold(0.0, f64::max) / scale;
    checks.push(check("odd_integral_vanishing", odd, 1e-8));

    let doc = run_currents(config)?;
    let p0 = if model.n_sites > 1 { doc.report.zeroth.p_pair[1][0].abs() } else { 1.0 };
    let bal1 = doc
        .report
        .balance_residual_first
        .iter()
        .map(|r| r / p0.max(1e-300))
        .fold(0.0, f64::max);
    checks.push(check("first_order_balance_relative", bal1, 1e-5));

    let all_pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport { checks, all_pass })
}

#[derive(Parser)]
#[command(
    name = "ness-chain",
    version,
    about = "NESS energy currents of a weakly nonlinear oscillator chain"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Compute zeroth- and first-order currents for one configuration.
    Currents {
        #[arg(long)]
        config: PathBuf,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: OutputFormat,
    },
    /// Sweep one or two variables over a grid and emit a CSV table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Swept variable (repeat for a 2-D grid).
        #[arg(long, required = true)]
        var: Vec<SweepVar>,
        /// Range start, one per --var.
        #[arg(long, required = true)]
        from: Vec<f64>,
        /// Range end (inclusive), one per --var.
        #[arg(long, required = true)]
        to: Vec<f64>,
        /// Number of grid points, one per --var.
        #[arg(long, required = true)]
        steps: Vec<usize>,
    },
    /// Run the full identity suite; nonzero exit on any failure.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Currents { config, out, format } => {
            let cfg = RunConfig::from_path(&config)?;
            let doc = run_currents(&cfg)?;
            let text = match format {
                OutputFormat::Json => {
                    let mut s = serde_json::to_string_pretty(&doc)
                        .map_err(|e| Error::Config(e.to_string()))?;
                    s.push('\n');
                    s
                }
                OutputFormat::Csv => currents_csv(&doc),
            };
            emit(&text, out.as_ref())?;
            Ok(0)
        }
        Command::Sweep { config, out, var, from, to, steps } => {
            if var.len() != from.len() || var.len() != to.len() || var.len() != steps.len() {
                return Err(Error::Config(
                    "--var, --from, --to and --steps must be given the same number of times"
                        .into(),
                ));
            }
            let cfg = RunConfig::from_path(&config)?;
            let axes: Vec<SweepAxis> = var
                .iter()
                .zip(&from)
                .zip(&to)
                .zip(&steps)
                .map(|(((&v, &f), &t), &s)| SweepAxis { var: v, from: f, to: t, points: s })
                .collect();
            let csv = run_sweep(&cfg, &axes)?;
            emit(&csv, out.as_ref())?;
            Ok(0)
        }
        Command::Verify { config } => {
            let cfg = RunConfig::from_path(&config)?;
            let report = run_verify(&cfg)?;
            let mut text = serde_json::to_string_pretty(&report)
                .map_err(|e| Error::Config(e.to_string()))?;
            text.push('\n');
            emit(&text, None)?;
            Ok(if report.all_pass { 0 } else { 4 })
        }
    }
}

/// Entry point used by the binary. Returns the process exit code.
pub fn run() -> i32 {
    if let Ok(v) = std::env::var("NESS_CHAIN_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            // Ignore the error if a global pool already exists.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        } else {
            eprintln!("error: NESS_CHAIN_THREADS must be a positive integer, got {v:?}");
            return 2;
        }
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => 2,
                Error::Quadrature { .. } | Error::Singular { .. } => 3,
            }
        }
    }
}
