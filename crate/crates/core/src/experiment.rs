//! Experiment configuration, orchestration over parameter cells, and reports.
//!
//! A config describes one base trading model plus an optional list of sweep
//! cells that override parts of it. Each cell produces a lower bound from the
//! projected policy, regression penalties fitted on the same paths, and one
//! upper bound per requested penalty on a fresh set of dual paths.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::BasisSpec;
use crate::dual::{duality_report, estimate_upper_bounds, DualPenalty, DualityGap, ZeroPenalty};
use crate::lqc::trading_value_recursion;
use crate::mdp::{estimate_lower_bound_with, inverse_normal_cdf, simulate_paths, BoundEstimate, MdpModel};
use crate::qp::SolverOptions;
use crate::regression::fit_coordinates;
use crate::trading::{
    phi_by_label, PlqcPolicy, TradingModel, TradingParams, TradingRegressors, TradingValuePenalty, BASE_PHI, DEFAULT_LAMBDA,
    SWEEP_LAMBDA, SWEEP_PHI,
};
use crate::{Error, Result};

/// Column order of the CSV report.
pub const CSV_COLUMNS: [&str; 18] = [
    "D", "T", "phi_label", "lambda", "gamma", "lb", "lb_hw", "ub_zero", "ub_zero_hw", "ub_t1", "ub_t1_hw", "ub_t2", "ub_t2_hw",
    "gap_pct", "gap_abs", "seed", "M", "L",
];

/// Reported dollar amounts are divided by this.
pub const REPORT_UNIT: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PenaltyKind {
    #[serde(rename = "zero")]
    Zero,
    #[serde(rename = "t1", alias = "taylor-1")]
    TaylorFirst,
    #[serde(rename = "t2", alias = "taylor-2")]
    TaylorSecond,
    /// Value-function penalty of the unconstrained problem.
    #[serde(rename = "exact-lqc")]
    ExactLqc,
}

impl PenaltyKind {
    pub fn name(self) -> &'static str {
        match self {
            PenaltyKind::Zero => "zero",
            PenaltyKind::TaylorFirst => "t1",
            PenaltyKind::TaylorSecond => "t2",
            PenaltyKind::ExactLqc => "exact-lqc",
        }
    }
}

impl fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PenaltyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "zero" => Ok(PenaltyKind::Zero),
            "t1" | "taylor-1" => Ok(PenaltyKind::TaylorFirst),
            "t2" | "taylor-2" => Ok(PenaltyKind::TaylorSecond),
            "exact-lqc" => Ok(PenaltyKind::ExactLqc),
            other => Err(Error::Config {
                field: "run.penalties".into(),
                message: format!("unknown penalty `{other}` (expected zero, t1, t2 or exact-lqc)"),
            }),
        }
    }
}

/// Parses a comma-separated penalty list such as `zero,t1,t2`.
pub fn parse_penalty_list(s: &str) -> Result<Vec<PenaltyKind>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
}

/// Mean-reversion matrix given by label or explicitly (rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhiSpec {
    Label(String),
    Matrix(Vec<Vec<f64>>),
}

impl Default for PhiSpec {
    fn default() -> Self {
        PhiSpec::Label("base".into())
    }
}

impl PhiSpec {
    pub fn label(&self) -> String {
        match self {
            PhiSpec::Label(l) => l.clone(),
            PhiSpec::Matrix(_) => "custom".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_assets", alias = "D")]
    pub assets: usize,
    #[serde(default = "default_horizon", alias = "T")]
    pub horizon: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub phi: PhiSpec,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub unconstrained: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loadings: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<Vec<f64>>>,
}

fn default_assets() -> usize {
    5
}
fn default_horizon() -> usize {
    12
}
fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            assets: default_assets(),
            horizon: default_horizon(),
            lambda: default_lambda(),
            phi: PhiSpec::default(),
            gamma: 0.0,
            unconstrained: false,
            x0: None,
            f0: None,
            loadings: None,
            psi: None,
            sigma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Paths for the lower bound and for fitting the penalties.
    #[serde(default = "default_lb_paths", alias = "M")]
    pub lb_paths: usize,
    /// Fresh paths for each upper bound.
    #[serde(default = "default_ub_paths", alias = "L")]
    pub ub_paths: usize,
    #[serde(default)]
    pub seed: u64,
    /// Two-sided confidence level of the reported half-widths.
    #[serde(default = "default_ci")]
    pub ci: f64,
    #[serde(default = "default_penalties")]
    pub penalties: Vec<PenaltyKind>,
    #[serde(default = "default_tol")]
    pub solver_tol: f64,
    #[serde(default = "default_max_iter")]
    pub solver_max_iter: usize,
}

fn default_lb_paths() -> usize {
    100_000
}
fn default_ub_paths() -> usize {
    100
}
fn default_ci() -> f64 {
    0.95
}
fn default_penalties() -> Vec<PenaltyKind> {
    vec![PenaltyKind::Zero, PenaltyKind::TaylorFirst, PenaltyKind::TaylorSecond]
}
fn default_tol() -> f64 {
    SolverOptions::default().tol
}
fn default_max_iter() -> usize {
    SolverOptions::default().max_iter
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lb_paths: default_lb_paths(),
            ub_paths: default_ub_paths(),
            seed: 0,
            ci: default_ci(),
            penalties: default_penalties(),
            solver_tol: default_tol(),
            solver_max_iter: default_max_iter(),
        }
    }
}

impl RunConfig {
    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions { tol: self.solver_tol, max_iter: self.solver_max_iter }
    }

    /// Normal quantile for the configured confidence level.
    pub fn ci_multiplier(&self) -> f64 {
        inverse_normal_cdf(0.5 + 0.5 * self.ci)
    }
}

/// Overrides applied to the base model for one report row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCell {
    #[serde(default, skip_serializing_if = "Option::is_none", alias = "D")]
    pub assets: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none", alias = "T")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<PhiSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_csv")]
    pub csv: String,
    #[serde(default = "default_json")]
    pub json: String,
}

fn default_csv() -> String {
    "report.csv".into()
}
fn default_json() -> String {
    "report.json".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { csv: default_csv(), json: default_json() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepCell>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn config_err(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config { field: field.into(), message: message.into() }
}

fn parse_err(e: impl fmt::Display) -> Error {
    let msg = e.to_string();
    config_err("<document>", msg.trim().to_string())
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(parse_err)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s).map_err(parse_err)?;
        c.validate()?;
        Ok(c)
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err("<document>", e.to_string()))
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| config_err("<document>", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.run;
        if r.ub_paths < 2 {
            return Err(config_err("run.ub_paths", format!("need at least 2 upper-bound paths, got {}", r.ub_paths)));
        }
        if r.lb_paths < r.ub_paths {
            return Err(config_err(
                "run.lb_paths",
                format!("lower-bound paths ({}) must be at least the upper-bound paths ({})", r.lb_paths, r.ub_paths),
            ));
        }
        if !(r.ci > 0.0 && r.ci < 1.0) {
            return Err(config_err("run.ci", format!("confidence level must lie in (0, 1), got {}", r.ci)));
        }
        if r.penalties.is_empty() {
            return Err(config_err("run.penalties", "at least one penalty is required"));
        }
        if r.penalties.iter().collect::<BTreeSet<_>>().len() != r.penalties.len() {
            return Err(config_err("run.penalties", "penalties must not repeat"));
        }
        if !(r.solver_tol > 0.0 && r.solver_tol.is_finite()) {
            return Err(config_err("run.solver_tol", "must be positive"));
        }
        if r.solver_max_iter == 0 {
            return Err(config_err("run.solver_max_iter", "must be at least 1"));
        }
        for (i, _) in self.cells().iter().enumerate() {
            self.model_params(i)?;
        }
        Ok(())
    }

    /// Cells to run: the sweep list, or the base model alone.
    pub fn cells(&self) -> Vec<SweepCell> {
        if self.sweep.is_empty() {
            vec![SweepCell::default()]
        } else {
            self.sweep.clone()
        }
    }

    fn cell_prefix(&self, i: usize) -> String {
        if self.sweep.is_empty() {
            "model".into()
        } else {
            format!("sweep[{i}]")
        }
    }

    /// Resolved model parameters of cell `i` with errors naming the field.
    pub fn model_params(&self, i: usize) -> Result<CellSpec> {
        let cells = self.cells();
        let cell = cells.get(i).ok_or_else(|| Error::invalid(format!("no cell {i}")))?;
        let m = &self.model;
        let field = |name: &str, overridden: bool| {
            if overridden {
                format!("{}.{name}", self.cell_prefix(i))
            } else {
                format!("model.{name}")
            }
        };

        let assets = cell.assets.unwrap_or(m.assets);
        if assets == 0 {
            return Err(config_err(field("assets", cell.assets.is_some()), "need at least one security"));
        }
        let horizon = cell.horizon.unwrap_or(m.horizon);
        if horizon == 0 {
            return Err(config_err(field("horizon", cell.horizon.is_some()), "need at least one period"));
        }
        let lambda = cell.lambda.unwrap_or(m.lambda);
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(config_err(field("lambda", cell.lambda.is_some()), format!("must be positive, got {lambda}")));
        }
        let gamma = cell.gamma.unwrap_or(m.gamma);
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(config_err(field("gamma", cell.gamma.is_some()), format!("must be non-negative, got {gamma}")));
        }
        let phi_spec = cell.phi.clone().unwrap_or_else(|| m.phi.clone());
        let phi_field = field("phi", cell.phi.is_some());
        let phi = match &phi_spec {
            PhiSpec::Label(l) => phi_by_label(l).ok_or_else(|| {
                let known: Vec<&str> = std::iter::once("base").chain(SWEEP_PHI.iter().map(|p| p.0)).collect();
                config_err(&phi_field, format!("unknown label `{l}` (known: {})", known.join(", ")))
            })?,
            PhiSpec::Matrix(rows) => matrix(rows, 2, 2, &phi_field)?,
        };

        let vector = |v: &Option<Vec<f64>>, len: usize, name: &str| -> Result<Option<DVector<f64>>> {
            match v {
                None => Ok(None),
                Some(v) if v.len() == len && v.iter().all(|x| x.is_finite()) => Ok(Some(DVector::from_row_slice(v))),
                Some(v) => Err(config_err(format!("model.{name}"), format!("expected {len} finite entries, got {}", v.len()))),
            }
        };
        let opt_matrix = |v: &Option<Vec<Vec<f64>>>, r: usize, c: usize, name: &str| -> Result<Option<DMatrix<f64>>> {
            v.as_ref().map(|rows| matrix(rows, r, c, &format!("model.{name}"))).transpose()
        };
        let params = TradingParams {
            num_assets: assets,
            horizon,
            lambda,
            phi,
            risk_aversion: gamma,
            loadings: opt_matrix(&m.loadings, assets, 2, "loadings")?,
            psi: opt_matrix(&m.psi, 2, 2, "psi")?,
            sigma: opt_matrix(&m.sigma, assets, assets, "sigma")?,
            x0: vector(&m.x0, assets, "x0")?,
            f0: vector(&m.f0, 2, "f0")?,
            unconstrained: m.unconstrained,
        };
        TradingModel::new(params.clone()).map_err(|e| config_err(self.cell_prefix(i), e.to_string()))?;
        Ok(CellSpec { phi_label: phi_spec.label(), params })
    }
}

fn matrix(rows: &[Vec<f64>], r: usize, c: usize, field: &str) -> Result<DMatrix<f64>> {
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(config_err(field, format!("expected a {r}x{c} matrix given as {r} rows")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(config_err(field, "entries must be finite"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

/// The sensitivity grid: every `Φ` alternative and every `λ` alternative at
/// `D ∈ {1, 5}`, `T = 12`.
pub fn appendix_sweep() -> Vec<SweepCell> {
    let mut cells = Vec::new();
    for (label, _) in SWEEP_PHI {
        for d in [1, 5] {
            cells.push(SweepCell {
                assets: Some(d),
                horizon: Some(12),
                lambda: Some(DEFAULT_LAMBDA),
                phi: Some(PhiSpec::Label(label.into())),
                gamma: None,
            });
        }
    }
    for (_, lambda) in SWEEP_LAMBDA {
        for d in [1, 5] {
            cells.push(SweepCell {
                assets: Some(d),
                horizon: Some(12),
                lambda: Some(lambda),
                phi: Some(PhiSpec::Label("base".into())),
                gamma: None,
            });
        }
    }
    debug_assert_eq!(phi_by_label("base").unwrap()[(0, 0)], BASE_PHI[0]);
    cells
}

/// Fully resolved parameters of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSpec {
    pub phi_label: String,
    pub params: TradingParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperBoundResult {
    pub penalty: PenaltyKind,
    pub estimate: BoundEstimate,
    /// Inner solves that stopped before reaching the tolerance.
    pub non_optimal: usize,
    /// Mean of the action-independent penalty part over the paths.
    pub mean_constant: f64,
}

/// One completed cell, in dollars.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub num_assets: usize,
    pub horizon: usize,
    pub phi_label: String,
    pub lambda: f64,
    pub gamma: f64,
    pub lower: BoundEstimate,
    pub upper: Vec<UpperBoundResult>,
    pub best: PenaltyKind,
    pub gap: DualityGap,
    pub seed: u64,
    pub lb_paths: usize,
    pub ub_paths: usize,
}

impl CellResult {
    pub fn upper_for(&self, kind: PenaltyKind) -> Option<&BoundEstimate> {
        self.upper.iter().find(|u| u.penalty == kind).map(|u| &u.estimate)
    }

    /// Weak duality up to sampling error for every upper bound.
    pub fn weak_duality_holds(&self) -> bool {
        self.upper.iter().all(|u| u.estimate.upper() >= self.lower.lower())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellFailure {
    pub cell: usize,
    pub field: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    /// Dollar amounts in the JSON report; the CSV uses thousands.
    pub units: &'static str,
    pub rows: Vec<CellResult>,
    pub failures: Vec<CellFailure>,
}

impl ExperimentReport {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs one resolved cell.
pub fn run_cell(spec: &CellSpec, run: &RunConfig) -> Result<CellResult> {
    let model = TradingModel::new(spec.params.clone())?;
    let d = model.num_assets();
    let solution = Arc::new(trading_value_recursion(&model)?);
    let ci = run.ci_multiplier();
    log::info!(
        "cell D={d} T={} phi={} lambda={:e} gamma={}: simulating {} policy paths",
        model.horizon,
        spec.phi_label,
        model.lambda,
        model.risk_aversion,
        run.lb_paths
    );
    let paths = simulate_paths(&model, &PlqcPolicy::new(solution.clone(), d), run.lb_paths, run.seed)?;
    let lower = estimate_lower_bound_with(&paths, ci)?;
    log::info!("lower bound {:.3} ± {:.3}", lower.mean, lower.half_width);

    let mut penalties: Vec<(PenaltyKind, Box<dyn DualPenalty>)> = Vec::new();
    for &kind in &run.penalties {
        let pen: Box<dyn DualPenalty> = match kind {
            PenaltyKind::Zero => Box::new(ZeroPenalty),
            PenaltyKind::TaylorFirst | PenaltyKind::TaylorSecond => {
                let order = if kind == PenaltyKind::TaylorFirst { 1 } else { 2 };
                let basis = BasisSpec::taylor(model.noise(), order)?;
                let regressors = Arc::new(TradingRegressors::new(solution.clone(), &model, order)?);
                log::info!("fitting the order-{order} penalty on {} paths", paths.len());
                Box::new(fit_coordinates(&paths, &basis, regressors)?)
            }
            PenaltyKind::ExactLqc => Box::new(TradingValuePenalty::new(solution.clone(), &model)),
        };
        penalties.push((kind, pen));
    }
    drop(paths);

    let named: Vec<(&str, &dyn DualPenalty)> = penalties.iter().map(|(k, p)| (k.name(), p.as_ref())).collect();
    log::info!("solving {} inner problems for {} penalties", run.ub_paths, named.len());
    let bounds = estimate_upper_bounds(&model, &named, run.ub_paths, run.seed, &run.solver_options(), ci)?;
    let mut upper = Vec::with_capacity(bounds.len());
    for ((kind, _), b) in penalties.iter().zip(&bounds) {
        let non_optimal = b.non_optimal();
        if non_optimal > 0 {
            log::warn!("{non_optimal} inner solves for `{kind}` stopped at the iteration cap");
        }
        let mean_constant = crate::mdp::neumaier_sum(b.constants.iter().copied()) / b.constants.len() as f64;
        log::info!("upper bound `{kind}` {:.3} ± {:.3}", b.estimate.mean, b.estimate.half_width);
        upper.push(UpperBoundResult { penalty: *kind, estimate: b.estimate, non_optimal, mean_constant });
    }
    let report = duality_report(lower, upper.iter().map(|u| (u.penalty.name().to_string(), u.estimate)).collect())?;
    let best = upper.iter().find(|u| u.penalty.name() == report.best).map(|u| u.penalty).expect("best penalty is one of ours");

    Ok(CellResult {
        num_assets: d,
        horizon: model.horizon,
        phi_label: spec.phi_label.clone(),
        lambda: model.lambda,
        gamma: model.risk_aversion,
        lower,
        upper,
        best,
        gap: report.gap,
        seed: run.seed,
        lb_paths: run.lb_paths,
        ub_paths: run.ub_paths,
    })
}

/// Runs every cell; a failing cell is recorded and the rest continue.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for i in 0..config.cells().len() {
        let spec = config.model_params(i)?;
        match run_cell(&spec, &config.run) {
            Ok(row) => rows.push(row),
            Err(e) => {
                log::error!("cell {i} failed: {e}");
                failures.push(CellFailure { cell: i, field: config.cell_prefix(i), error: e.to_string() });
            }
        }
    }
    Ok(ExperimentReport { units: "dollars", rows, failures })
}

/// [`run_experiment`] on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(config: &ExperimentConfig, threads: usize) -> Result<ExperimentReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| run_experiment(config))
}

/// Rounds to six significant digits and prints the shortest exact form.
pub fn format_sig(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_nan() { String::new() } else { format!("{}", if v == 0.0 { 0.0 } else { v }) };
    }
    let rounded: f64 = format!("{v:.5e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn csv_record(row: &CellResult) -> Vec<String> {
    let k = |v: f64| format_sig(v / REPORT_UNIT);
    let ub = |kind: PenaltyKind| match row.upper_for(kind) {
        Some(e) => (k(e.mean), k(e.half_width)),
        None => (String::new(), String::new()),
    };
    let (zero, zero_hw) = ub(PenaltyKind::Zero);
    let (t1, t1_hw) = ub(PenaltyKind::TaylorFirst);
    let (t2, t2_hw) = ub(PenaltyKind::TaylorSecond);
    vec![
        row.num_assets.to_string(),
        row.horizon.to_string(),
        row.phi_label.clone(),
        format_sig(row.lambda),
        format_sig(row.gamma),
        k(row.lower.mean),
        k(row.lower.half_width),
        zero,
        zero_hw,
        t1,
        t1_hw,
        t2,
        t2_hw,
        row.gap.ratio.map(|r| format_sig(100.0 * r)).unwrap_or_default(),
        k(row.gap.absolute),
        row.seed.to_string(),
        row.lb_paths.to_string(),
        row.ub_paths.to_string(),
    ]
}

/// CSV report body (header plus one line per completed cell).
pub fn csv_string(rows: &[CellResult]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::invalid("report needs at least one row"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_COLUMNS).map_err(io)?;
    for row in rows {
        w.write_record(csv_record(row)).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_csv(rows: &[CellResult], path: &Path) -> Result<()> {
    std::fs::write(path, csv_string(rows)?)?;
    Ok(())
}

pub fn write_json(report: &ExperimentReport, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
