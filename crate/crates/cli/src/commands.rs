//! The batch pipelines behind each subcommand.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use latentcdf::ecdf::raw_gram;
use latentcdf::sim::{self, McRecord};
use latentcdf::spectral::{
    self, evaluation_grid, forecast_cdf, grid_moments, monotonize, quantile_from_cdf, variance_from_cdf,
    SpectralModel,
};
use latentcdf::tsmodel::{
    diebold_mariano, forecast_arma, har_forecast, ljung_box, select_arma, AicEntry, DmTest, LjungBox,
};
use latentcdf::{CenteredGram, CyclePanel, Error, Exec};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::ingest::{read_panel, RawPanel};
use crate::output::{ensure_dir, num, write_json, Table};

/// Residual autocorrelation lags reported next to each score model.
const RESIDUAL_LB_LAGS: usize = 10;

#[derive(Debug, Clone)]
pub struct Context {
    pub cfg: RunConfig,
    pub out_dir: PathBuf,
    pub exec: Exec,
}

impl Context {
    pub fn new(cfg: RunConfig) -> Self {
        let out_dir = cfg.out_dir.clone();
        Self { cfg, out_dir, exec: Exec::default() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn check_cycles(n: usize, p: usize) -> Result<()> {
    if n < p + 1 {
        return Err(CliError::Config(format!("{n} cycles are too few for lag p = {p}; need at least {}", p + 1)));
    }
    Ok(())
}

fn load(ctx: &Context, data: &Path) -> Result<(RawPanel, CyclePanel)> {
    let raw = read_panel(data)?;
    check_cycles(raw.len(), ctx.cfg.p)?;
    let panel = raw.to_panel(ctx.cfg.demean_per_cycle)?;
    Ok((raw, panel))
}

#[derive(Debug, Serialize)]
struct ModelFile<'a> {
    labels: &'a [String],
    config: &'a RunConfig,
    /// Scores from this 1-based cycle on use Gram entries outside the block `M` was built from.
    boundary_start: usize,
    model: &'a SpectralModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSummary {
    pub n: usize,
    pub d_hat: usize,
    pub theta: Vec<f64>,
}

pub fn estimate(ctx: &Context, data: &Path) -> Result<EstimateSummary> {
    let (raw, panel) = load(ctx, data)?;
    let model = spectral::fit_with(&panel, &ctx.cfg.measure, &ctx.cfg.spectral(), ctx.exec)?;
    ensure_dir(&ctx.out_dir)?;
    write_json(&ctx.path("model.json"), &ModelFile {
            labels: &raw.labels,
            config: &ctx.cfg,
            boundary_start: model.boundary_start() + 1,
            model: &model,
        })?;

    let mut eig = Table::new(&["j", "theta", "kept", "selected"]);
    for (j, t) in model.theta.iter().enumerate() {
        eig.row([(j + 1).to_string(), num(*t), (j < model.kept()).to_string(), (j < model.d_hat).to_string()]);
    }
    eig.write(&ctx.path("eigenvalues.csv"))?;

    let d = model.d_hat;
    let mut header = vec!["t".to_string(), "cycle".to_string(), "boundary".to_string()];
    header.extend((1..=d).map(|j| format!("W_{j}")));
    let mut scores = Table::new(&header);
    for t in 0..model.n {
        let boundary = (t >= model.boundary_start()).to_string();
        let mut row = vec![(t + 1).to_string(), raw.labels[t].clone(), boundary];
        row.extend((0..d).map(|j| num(model.scores[j][t])));
        scores.row(row);
    }
    scores.write(&ctx.path("scores.csv"))?;

    let grid = evaluation_grid(&panel);
    let mean = panel.eval_combination(&model.mean_coeffs, &grid);
    let traces: Vec<Vec<f64>> = (0..d).map(|j| spectral::eigenfunction_trace(&model, &panel, j, &grid)).collect();
    let mut header = vec!["x".to_string(), "mean_cdf".to_string()];
    header.extend((1..=d).map(|j| format!("psi_{j}")));
    let mut ef = Table::new(&header);
    for (k, x) in grid.iter().enumerate() {
        let mut row = vec![num(*x), num(mean[k])];
        row.extend(traces.iter().map(|tr| num(tr[k])));
        ef.row(row);
    }
    ef.write(&ctx.path("eigenfunctions.csv"))?;

    Ok(EstimateSummary { n: model.n, d_hat: d, theta: model.theta.clone() })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScoreForecast {
    pub component: usize,
    pub order: (usize, usize),
    pub aic_table: Vec<AicEntry>,
    pub w_next: f64,
    pub stationarity_warning: Option<String>,
    pub residual_ljung_box: Option<LjungBox>,
}

/// ARMA forecasts of the first `d̂` score series.
pub fn forecast_scores(model: &SpectralModel, orders: &[(usize, usize)]) -> Result<Vec<ScoreForecast>> {
    (0..model.d_hat)
        .map(|j| {
            let series = &model.scores[j];
            let (fit, table) = select_arma(series, orders)?;
            let lags = RESIDUAL_LB_LAGS.min(series.len().saturating_sub(1) / 2);
            Ok(ScoreForecast {
                component: j + 1,
                order: fit.order,
                aic_table: table,
                w_next: forecast_arma(&fit, series),
                stationarity_warning: fit.warning.clone(),
                residual_ljung_box: if lags > 0 { ljung_box(&fit.residuals, lags).ok() } else { None },
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMethod {
    SignedMoments,
    MonotonizedGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceForecast {
    pub mean: f64,
    pub variance: f64,
    pub method: VarianceMethod,
}

/// Second moment of `F̃`; falls back to the monotonized grid CDF when the
/// signed moments give a negative variance.
pub fn strategy_one(coeffs: &[f64], panel: &CyclePanel) -> Result<VarianceForecast> {
    match variance_from_cdf(coeffs, panel) {
        Ok(variance) => Ok(VarianceForecast {
            mean: spectral::mean_from_cdf(coeffs, panel),
            variance,
            method: VarianceMethod::SignedMoments,
        }),
        Err(Error::NegativeVariance(_)) => {
            let grid = evaluation_grid(panel);
            let cdf = monotonize(&panel.eval_combination(coeffs, &grid));
            let (mean, variance) = grid_moments(&grid, &cdf);
            Ok(VarianceForecast { mean, variance, method: VarianceMethod::MonotonizedGrid })
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Serialize)]
struct QuantileEntry {
    tau: f64,
    value: f64,
}

#[derive(Debug, Serialize)]
struct ForecastReport<'a> {
    cycles: usize,
    last_cycle: &'a str,
    p: usize,
    d_hat: usize,
    theta: &'a [f64],
    components: Vec<ScoreForecast>,
    w_next: Vec<f64>,
    strategy1: VarianceForecast,
    /// Quantiles are on the demeaned scale when `demean_per_cycle` is set.
    quantiles: Vec<QuantileEntry>,
    demeaned_scale: bool,
    strategy2_har_variance: Option<f64>,
    strategy2_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSummary {
    pub w_next: Vec<f64>,
    pub strategy1: f64,
    pub strategy2: Option<f64>,
}

pub fn forecast(ctx: &Context, data: &Path) -> Result<ForecastSummary> {
    let (raw, panel) = load(ctx, data)?;
    let model = spectral::fit_with(&panel, &ctx.cfg.measure, &ctx.cfg.spectral(), ctx.exec)?;
    let components = forecast_scores(&model, &ctx.cfg.arma_orders)?;
    let w_next: Vec<f64> = components.iter().map(|c| c.w_next).collect();
    let coeffs = forecast_cdf(&model, &w_next)?;
    let s1 = strategy_one(&coeffs, &panel)?;
    let grid = evaluation_grid(&panel);
    let quantiles = ctx
        .cfg
        .quantiles
        .iter()
        .map(|&tau| QuantileEntry { tau, value: quantile_from_cdf(&coeffs, &panel, &grid, tau) })
        .collect();
    let (s2, s2_err) = match har_forecast(&panel.variances()) {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };

    ensure_dir(&ctx.out_dir)?;
    let report = ForecastReport {
        cycles: model.n,
        last_cycle: raw.labels.last().map(String::as_str).unwrap_or(""),
        p: model.p,
        d_hat: model.d_hat,
        theta: &model.theta[..model.theta.len().min(10)],
        components,
        w_next: w_next.clone(),
        strategy1: s1,
        quantiles,
        demeaned_scale: ctx.cfg.demean_per_cycle,
        strategy2_har_variance: s2,
        strategy2_error: s2_err,
    };
    write_json(&ctx.path("forecast.json"), &report)?;

    let signed = panel.eval_combination(&coeffs, &grid);
    let repaired = monotonize(&signed);
    let mut trace = Table::new(&["x", "cdf", "cdf_monotone"]);
    for k in 0..grid.len() {
        trace.row([num(grid[k]), num(signed[k]), num(repaired[k])]);
    }
    trace.write(&ctx.path("forecast_cdf.csv"))?;
    Ok(ForecastSummary { w_next, strategy1: s1.variance, strategy2: s2 })
}

/// One rolling-origin step: fit on the first `origin` cycles, forecast cycle
/// `origin` (0-based).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub origin: usize,
    pub target: String,
    pub d_hat: usize,
    pub orders: Vec<(usize, usize)>,
    pub w_next: Vec<f64>,
    pub realized: f64,
    pub strategy1: f64,
    pub strategy2: f64,
    pub method: Option<VarianceMethod>,
    pub error: Option<String>,
}

impl StepRecord {
    pub fn completed(&self) -> bool {
        self.error.is_none()
    }
}

fn backtest_step(ctx: &Context, gram: &CenteredGram, panel: &CyclePanel, origin: usize) -> Result<StepRecord> {
    let prefix = panel.prefix(origin)?;
    let model = spectral::fit_gram(&gram.leading(origin), &ctx.cfg.spectral())?;
    let comps = forecast_scores(&model, &ctx.cfg.arma_orders)?;
    let w_next: Vec<f64> = comps.iter().map(|c| c.w_next).collect();
    let s1 = strategy_one(&forecast_cdf(&model, &w_next)?, &prefix)?;
    let s2 = har_forecast(&prefix.variances())?;
    Ok(StepRecord {
        origin,
        target: String::new(),
        d_hat: model.d_hat,
        orders: comps.iter().map(|c| c.order).collect(),
        w_next,
        realized: panel.cycle(origin).variance(),
        strategy1: s1.variance,
        strategy2: s2,
        method: Some(s1.method),
        error: None,
    })
}

/// Rolling-origin forecasts for origins `n0..N`. The raw Gram matrix is
/// computed once; each step recentres its leading block.
pub fn run_backtest(ctx: &Context, raw: &RawPanel, n0: usize) -> Result<Vec<StepRecord>> {
    let total = raw.len();
    let floor = 30.max(ctx.cfg.p + 10);
    if n0 < floor {
        return Err(CliError::Config(format!("n0 = {n0} is below the minimum {floor}")));
    }
    if total <= n0 {
        return Err(CliError::Config(format!("backtest needs more than n0 = {n0} cycles, got {total}")));
    }
    let panel = raw.to_panel(ctx.cfg.demean_per_cycle)?;
    let gram = CenteredGram::from_raw(raw_gram(&panel, &ctx.cfg.measure, ctx.exec));
    let steps = ctx.exec.map_indexed(total - n0, |i| {
        let origin = n0 + i;
        let mut rec = backtest_step(ctx, &gram, &panel, origin).unwrap_or_else(|e| StepRecord {
            origin,
            target: String::new(),
            d_hat: 0,
            orders: Vec::new(),
            w_next: Vec::new(),
            realized: panel.cycle(origin).variance(),
            strategy1: f64::NAN,
            strategy2: f64::NAN,
            method: None,
            error: Some(e.to_string()),
        });
        rec.target = raw.labels[origin].clone();
        rec
    });
    Ok(steps)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum DmOutcome {
    Computed(DmTest),
    NotComputable { not_computable: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub mse_strategy1: f64,
    pub mse_strategy2: f64,
    /// `MSE₁ / MSE₂`.
    pub relative_mse: f64,
    pub diebold_mariano: DmOutcome,
}

pub fn compare(errors1: &[f64], errors2: &[f64]) -> Comparison {
    let mse = |e: &[f64]| e.iter().map(|v| v * v).sum::<f64>() / e.len() as f64;
    let (m1, m2) = (mse(errors1), mse(errors2));
    let diebold_mariano = match diebold_mariano(errors1, errors2) {
        Ok(t) => DmOutcome::Computed(t),
        Err(e) => DmOutcome::NotComputable { not_computable: e.to_string() },
    };
    Comparison { mse_strategy1: m1, mse_strategy2: m2, relative_mse: m1 / m2, diebold_mariano }
}

#[derive(Debug, Serialize)]
struct SkippedStep<'a> {
    origin: usize,
    target: &'a str,
    error: &'a str,
}

#[derive(Debug, Serialize)]
struct BacktestReport<'a> {
    cycles: usize,
    n0: usize,
    steps: usize,
    completed: usize,
    skipped: Vec<SkippedStep<'a>>,
    comparison: Option<Comparison>,
}

pub fn backtest(ctx: &Context, data: &Path) -> Result<Option<Comparison>> {
    let raw = read_panel(data)?;
    let steps = run_backtest(ctx, &raw, ctx.cfg.n0)?;
    let done: Vec<&StepRecord> = steps.iter().filter(|s| s.completed()).collect();
    let e1: Vec<f64> = done.iter().map(|s| s.strategy1 - s.realized).collect();
    let e2: Vec<f64> = done.iter().map(|s| s.strategy2 - s.realized).collect();
    let comparison = (!done.is_empty()).then(|| compare(&e1, &e2));

    ensure_dir(&ctx.out_dir)?;
    let mut table = Table::new(&[
        "origin",
        "target_cycle",
        "d_hat",
        "arma_orders",
        "w_next",
        "realized_variance",
        "strategy1_variance",
        "strategy2_variance",
        "error1",
        "error2",
        "variance_method",
        "error",
    ]);
    for s in &steps {
        let orders: Vec<String> = s.orders.iter().map(|(p, q)| format!("{p}:{q}")).collect();
        let w: Vec<String> = s.w_next.iter().map(|v| num(*v)).collect();
        let method = match s.method {
            Some(VarianceMethod::SignedMoments) => "signed_moments",
            Some(VarianceMethod::MonotonizedGrid) => "monotonized_grid",
            None => "",
        };
        table.row([
            s.origin.to_string(),
            s.target.clone(),
            s.d_hat.to_string(),
            orders.join(" "),
            w.join(" "),
            num(s.realized),
            num(s.strategy1),
            num(s.strategy2),
            num(s.strategy1 - s.realized),
            num(s.strategy2 - s.realized),
            method.to_string(),
            s.error.clone().unwrap_or_default(),
        ]);
    }
    table.write(&ctx.path("backtest_steps.csv"))?;
    let report = BacktestReport {
        cycles: raw.len(),
        n0: ctx.cfg.n0,
        steps: steps.len(),
        completed: done.len(),
        skipped: steps
            .iter()
            .filter_map(|s| {
                s.error.as_deref().map(|e| SkippedStep { origin: s.origin, target: &s.target, error: e })
            })
            .collect(),
        comparison: comparison.clone(),
    };
    write_json(&ctx.path("backtest_report.json"), &report)?;
    if done.is_empty() {
        return Err(Error::Undefined("no backtest step completed".into()).into());
    }
    Ok(comparison)
}

pub fn simulate(ctx: &Context) -> Result<usize> {
    let cfg = ctx.cfg.sim_config();
    let sim = sim::simulate_panel(&cfg)?;
    ensure_dir(&ctx.out_dir)?;
    let mut panel = Table::new(&["cycle", "value"]);
    for (t, cycle) in sim.cycles.iter().enumerate() {
        for x in cycle {
            panel.row([(t + 1).to_string(), num(*x)]);
        }
    }
    panel.write(&ctx.path("panel.csv"))?;
    let mut truth = Table::new(&["t", "W"]);
    for (t, w) in sim.latent.w.iter().enumerate() {
        truth.row([(t + 1).to_string(), num(*w)]);
    }
    truth.write(&ctx.path("truth.csv"))?;
    Ok(sim.cycles.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub mean: f64,
}

impl Spread {
    fn of(values: &[f64]) -> Self {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        Self {
            median: sim::sample_quantile(&finite, 0.5),
            q1: sim::sample_quantile(&finite, 0.25),
            q3: sim::sample_quantile(&finite, 0.75),
            mean: finite.iter().sum::<f64>() / finite.len() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub config: sim::SimConfig,
    pub settings: sim::McSettings,
    pub reps: usize,
    pub failures: usize,
    pub target_theta: f64,
    pub metrics: BTreeMap<&'static str, Spread>,
    pub d_hat_counts: BTreeMap<usize, usize>,
    /// Share of replications with `‖F̃₁ − F₁‖ < ‖F̂₁ − F₁‖`.
    pub reconstruction_wins: f64,
}

pub fn summarize(cfg: &sim::SimConfig, settings: &sim::McSettings, records: &[McRecord]) -> McSummary {
    let ok: Vec<&McRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    let col = |f: fn(&McRecord) -> f64| -> Vec<f64> { ok.iter().map(|r| f(r)).collect() };
    let mut metrics = BTreeMap::new();
    metrics.insert("theta_1", Spread::of(&col(|r| r.theta[0])));
    metrics.insert("theta_ratio", Spread::of(&col(|r| r.theta[0] / r.theta.get(1).copied().unwrap_or(0.0))));
    metrics.insert("psi_error", Spread::of(&col(|r| r.psi_error)));
    metrics.insert("score_max_error", Spread::of(&col(|r| r.score_max_error)));
    metrics.insert("ftilde_error", Spread::of(&col(|r| r.ftilde_error)));
    metrics.insert("fhat_error", Spread::of(&col(|r| r.fhat_error)));
    metrics.insert("mean_error", Spread::of(&col(|r| r.mean_error)));
    let mut d_hat_counts = BTreeMap::new();
    for r in &ok {
        *d_hat_counts.entry(r.d_hat).or_insert(0) += 1;
    }
    let wins = ok.iter().filter(|r| r.ftilde_error < r.fhat_error).count();
    McSummary {
        config: *cfg,
        settings: *settings,
        reps: records.len(),
        failures: records.len() - ok.len(),
        target_theta: cfg.target_theta(),
        metrics,
        d_hat_counts,
        reconstruction_wins: wins as f64 / ok.len().max(1) as f64,
    }
}

pub fn montecarlo(ctx: &Context) -> Result<McSummary> {
    let cfg = ctx.cfg.sim_config();
    let settings = ctx.cfg.mc_settings();
    let records = sim::run_monte_carlo_with(&cfg, ctx.cfg.montecarlo.reps, &settings, ctx.exec)?;
    ensure_dir(&ctx.out_dir)?;
    let mut table = Table::new(&[
        "rep",
        "seed",
        "theta_1",
        "theta_2",
        "theta_3",
        "theta_4",
        "theta_5",
        "d_hat",
        "psi_sign",
        "psi_error",
        "score_max_error",
        "ftilde_error",
        "fhat_error",
        "fhat_sup_error",
        "mean_error",
        "error",
    ]);
    for r in &records {
        let mut row = vec![r.rep.to_string(), r.seed.to_string()];
        row.extend((0..5).map(|j| r.theta.get(j).map_or(String::new(), |t| num(*t))));
        row.extend([
            r.d_hat.to_string(),
            num(r.psi_sign),
            num(r.psi_error),
            num(r.score_max_error),
            num(r.ftilde_error),
            num(r.fhat_error),
            num(r.fhat_sup_error),
            num(r.mean_error),
            r.error.clone().unwrap_or_default(),
        ]);
        table.row(row);
    }
    table.write(&ctx.path("montecarlo.csv"))?;
    let summary = summarize(&cfg, &settings, &records);
    write_json(&ctx.path("montecarlo_summary.json"), &summary)?;
    Ok(summary)
}
