//! Walk-forward backtests.
//!
//! For every seed and every period `t > warmup` the harness fits the candidate
//! grid on the training side of periods `< t`, lets each selector pick a model
//! using the validation side, and predicts every observation of period `t`.
//! Per-seed metrics are averaged over seeds.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::atoms;
use crate::baselines;
use crate::duel;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gapscan::{self, ComparisonConfig, LossDifferenceStream};
use crate::metrics::{self, Metric, PredictionLog, RegimeWindow, WealthPoint};
use crate::models::{build_candidate_grid, FittedModel, GridConfig};
use crate::panel::{self, CsvSchema, Panel, SplitPanel};
use crate::plot::{self, Series};
use crate::rng::{self, domain};
use crate::synth::{self, DriftEnv};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Csv {
        path: PathBuf,
        #[serde(default)]
        schema: CsvSchema,
    },
    Synthetic { env: DriftEnv, periods: usize },
}

impl DataSource {
    pub fn load(&self) -> Result<Panel> {
        match self {
            DataSource::Csv { path, schema } => panel::load_csv(path, schema),
            DataSource::Synthetic { env, periods } => synth::generate(env, *periods),
        }
    }
}

/// When the train/validation split is drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// One split per seed, shared by every period.
    #[default]
    OncePerRun,
    /// A fresh split at every `t`, seeded by `substream_key(seed, RESPLIT, t)`.
    PerPeriod,
}

/// How δ′ is set for each duel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaSchedule {
    /// Use `delta_prime` as given.
    #[default]
    Fixed,
    /// `delta_prime / (3 Λ² t)` for `Λ` candidates at period `t`.
    TheoryScaled,
}

fn default_delta() -> f64 {
    0.1
}
fn default_m2_mse() -> f64 {
    5e-4
}
fn default_m2_r2() -> f64 {
    5.0
}
fn default_v_floor() -> f64 {
    1e-8
}
fn default_val_windows() -> Vec<usize> {
    vec![32, 128, 512]
}
fn default_cv_window() -> usize {
    36
}
fn default_folds() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "selector", rename_all = "snake_case")]
pub enum SelectorConfig {
    AtomsMse {
        #[serde(default = "default_delta")]
        delta_prime: f64,
        #[serde(default = "default_m2_mse")]
        m_squared: f64,
        #[serde(default)]
        delta_schedule: DeltaSchedule,
    },
    AtomsR2 {
        #[serde(default = "default_delta")]
        delta_prime: f64,
        #[serde(default = "default_m2_r2")]
        m_squared: f64,
        #[serde(default = "default_v_floor")]
        v_floor: f64,
        #[serde(default)]
        delta_schedule: DeltaSchedule,
    },
    /// Expands to one selector per window.
    FixedVal {
        #[serde(default = "default_val_windows")]
        windows: Vec<usize>,
    },
    FixedCv {
        #[serde(default = "default_cv_window")]
        window: usize,
        #[serde(default = "default_folds")]
        folds: usize,
    },
}

impl SelectorConfig {
    pub fn atoms_mse() -> Self {
        SelectorConfig::AtomsMse {
            delta_prime: default_delta(),
            m_squared: default_m2_mse(),
            delta_schedule: DeltaSchedule::Fixed,
        }
    }

    pub fn atoms_r2() -> Self {
        SelectorConfig::AtomsR2 {
            delta_prime: default_delta(),
            m_squared: default_m2_r2(),
            v_floor: default_v_floor(),
            delta_schedule: DeltaSchedule::Fixed,
        }
    }

    pub fn fixed_val() -> Self {
        SelectorConfig::FixedVal {
            windows: default_val_windows(),
        }
    }

    pub fn fixed_cv() -> Self {
        SelectorConfig::FixedCv {
            window: default_cv_window(),
            folds: default_folds(),
        }
    }
}

/// A single selector after expanding fixed-val window lists.
#[derive(Clone, Debug, PartialEq)]
enum Selector {
    Atoms {
        name: String,
        r2: bool,
        cfg: ComparisonConfig,
        schedule: DeltaSchedule,
    },
    FixedVal {
        name: String,
        window: usize,
    },
    FixedCv {
        name: String,
        window: usize,
        folds: usize,
    },
}

impl Selector {
    fn name(&self) -> &str {
        match self {
            Selector::Atoms { name, .. } | Selector::FixedVal { name, .. } | Selector::FixedCv { name, .. } => name,
        }
    }

    fn is_atoms(&self) -> bool {
        matches!(self, Selector::Atoms { .. })
    }
}

fn default_fraction() -> f64 {
    0.8
}
fn default_seeds() -> Vec<u64> {
    (0..20).collect()
}
fn default_warmup() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: DataSource,
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub split_mode: SplitMode,
    pub selectors: Vec<SelectorConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    /// Periods held back before the first prediction (first prediction at `warmup + 1`).
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    #[serde(default)]
    pub max_lookback: Option<usize>,
    #[serde(default)]
    pub regimes: Vec<RegimeWindow>,
    /// Keep the full tournament audit for every ATOMS selection.
    #[serde(default)]
    pub keep_traces: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub execution: Execution,
}

impl RunConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut cfg: RunConfig = serde_json::from_str(&text)?;
        // CSV paths are relative to the config file.
        if let DataSource::Csv { path: data, .. } = &mut cfg.data {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.selectors.is_empty() {
            return Err(Error::Config("at least one selector is required".into()));
        }
        if self.warmup == 0 {
            return Err(Error::Config("warmup must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.max_lookback == Some(0) {
            return Err(Error::Config("max_lookback must be at least 1".into()));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        let selectors = self.expand_selectors()?;
        let mut names: Vec<&str> = selectors.iter().map(Selector::name).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != selectors.len() {
            return Err(Error::Config("selector names must be distinct".into()));
        }
        if selectors.iter().any(|s| !matches!(s, Selector::FixedCv { .. })) && self.grid.model_specs().is_empty() {
            return Err(Error::Config("candidate grid is empty".into()));
        }
        Ok(())
    }

    fn expand_selectors(&self) -> Result<Vec<Selector>> {
        let mut out = Vec::new();
        for s in &self.selectors {
            match s {
                SelectorConfig::AtomsMse {
                    delta_prime,
                    m_squared,
                    delta_schedule,
                } => out.push(Selector::Atoms {
                    name: "atoms_mse".into(),
                    r2: false,
                    cfg: ComparisonConfig {
                        delta_prime: *delta_prime,
                        m_squared: *m_squared,
                        v_floor: default_v_floor(),
                        max_lookback: self.max_lookback,
                    },
                    schedule: *delta_schedule,
                }),
                SelectorConfig::AtomsR2 {
                    delta_prime,
                    m_squared,
                    v_floor,
                    delta_schedule,
                } => out.push(Selector::Atoms {
                    name: "atoms_r2".into(),
                    r2: true,
                    cfg: ComparisonConfig {
                        delta_prime: *delta_prime,
                        m_squared: *m_squared,
                        v_floor: *v_floor,
                        max_lookback: self.max_lookback,
                    },
                    schedule: *delta_schedule,
                }),
                SelectorConfig::FixedVal { windows } => {
                    if windows.is_empty() || windows.contains(&0) {
                        return Err(Error::Config("fixed_val windows must be nonempty and positive".into()));
                    }
                    out.extend(windows.iter().map(|&window| Selector::FixedVal {
                        name: format!("fixed_val_{window}"),
                        window,
                    }));
                }
                SelectorConfig::FixedCv { window, folds } => {
                    if *window == 0 || *folds < 2 {
                        return Err(Error::Config("fixed_cv needs window >= 1 and folds >= 2".into()));
                    }
                    out.push(Selector::FixedCv {
                        name: "fixed_cv".into(),
                        window: *window,
                        folds: *folds,
                    });
                }
            }
        }
        for s in &out {
            if let Selector::Atoms { cfg, .. } = s {
                cfg.validate()?;
            }
        }
        Ok(out)
    }
}

/// One selector's choice at one period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub period: usize,
    pub selector: String,
    pub family: String,
    pub hyperparameters: String,
    /// Window exponent `k`; `None` for the CV refit.
    pub window_k: Option<u32>,
    pub effective_window: usize,
    pub duel_count: usize,
    /// `ℓ̂` of the last duel played, for ATOMS selectors.
    pub final_window: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub period: usize,
    pub selector: String,
    pub trace: atoms::SelectionTrace,
}

/// Everything produced for one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    /// One log per selector, in selector order. Written to `predictions.csv`.
    #[serde(skip)]
    pub logs: Vec<PredictionLog>,
    pub selections: Vec<SelectionRecord>,
    /// `None` when some position would lose more than the whole stake.
    pub wealth: Vec<Option<Vec<WealthPoint>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub traces: Vec<TraceRecord>,
}

/// A metric per seed and its mean over the seeds where it is defined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedAverage {
    pub mean: Option<f64>,
    pub per_seed: Vec<Option<f64>>,
}

impl SeedAverage {
    pub fn new(per_seed: Vec<Option<f64>>) -> Self {
        let defined: Vec<f64> = per_seed.iter().flatten().copied().collect();
        let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        Self { mean, per_seed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics {
    pub label: String,
    pub start: usize,
    pub end: usize,
    pub r2_zero: SeedAverage,
    pub r2_standard: SeedAverage,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectorSummary {
    pub selector: String,
    pub overall: WindowMetrics,
    pub annual: Vec<WindowMetrics>,
    pub regimes: Vec<WindowMetrics>,
    pub final_wealth: SeedAverage,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcessRatioRow {
    pub selector: String,
    pub baseline: String,
    pub ratio: SeedAverage,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub per_seed_seconds: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub selectors: Vec<String>,
    pub seeds: Vec<u64>,
    pub first_period: usize,
    pub last_period: usize,
    pub observations_per_seed: usize,
    pub summaries: Vec<SelectorSummary>,
    pub excess_ratios: Vec<ExcessRatioRow>,
    pub runs: Vec<SeedRun>,
    /// Wall-clock timings; written to `timing.json`, not `metrics.json`.
    #[serde(skip)]
    pub timing: Timing,
    #[serde(skip)]
    labels: Option<Vec<String>>,
}

impl BacktestReport {
    pub fn summary(&self, selector: &str) -> Option<&SelectorSummary> {
        self.summaries.iter().find(|s| s.selector == selector)
    }

    pub fn log(&self, seed: u64, selector: &str) -> Option<&PredictionLog> {
        let i = self.selectors.iter().position(|s| s == selector)?;
        self.runs.iter().find(|r| r.seed == seed).map(|r| &r.logs[i])
    }
}

/// Runs the configured backtest on the configured data.
pub fn run(config: &RunConfig) -> Result<BacktestReport> {
    let panel = config.data.load()?;
    run_on(config, &panel)
}

/// Runs the configured backtest on an already loaded panel.
pub fn run_on(config: &RunConfig, panel: &Panel) -> Result<BacktestReport> {
    config.validate()?;
    let selectors = config.expand_selectors()?;
    if panel.num_periods() <= config.warmup {
        return Err(Error::Config(format!(
            "panel has {} periods; warmup {} leaves nothing to predict",
            panel.num_periods(),
            config.warmup
        )));
    }
    let exec = config.execution;
    let start = Instant::now();
    let runs = exec.try_map_range(config.seeds.len(), |i| {
        let t0 = Instant::now();
        run_seed(config, &selectors, panel, config.seeds[i], exec).map(|r| (r, t0.elapsed().as_secs_f64()))
    })?;
    let timing = Timing {
        total_seconds: start.elapsed().as_secs_f64(),
        per_seed_seconds: runs.iter().map(|r| r.1).collect(),
    };
    let runs: Vec<SeedRun> = runs.into_iter().map(|r| r.0).collect();
    let names: Vec<String> = selectors.iter().map(|s| s.name().to_string()).collect();
    let summaries = summarize(&names, &runs, &config.regimes, panel.labels())?;
    let excess_ratios = excess_ratios(&selectors, &runs)?;
    Ok(BacktestReport {
        selectors: names,
        seeds: config.seeds.clone(),
        first_period: config.warmup + 1,
        last_period: panel.num_periods(),
        observations_per_seed: (config.warmup + 1..=panel.num_periods())
            .map(|t| panel.period(t).len())
            .sum(),
        summaries,
        excess_ratios,
        runs,
        timing,
        labels: panel.labels().map(<[String]>::to_vec),
    })
}

fn delta_for(schedule: DeltaSchedule, base: &ComparisonConfig, candidates: usize, t: usize) -> ComparisonConfig {
    match schedule {
        DeltaSchedule::Fixed => base.clone(),
        DeltaSchedule::TheoryScaled => ComparisonConfig {
            delta_prime: base.delta_prime / (3.0 * (candidates * candidates) as f64 * t as f64),
            ..base.clone()
        },
    }
}

fn run_seed(config: &RunConfig, selectors: &[Selector], panel: &Panel, seed: u64, exec: Execution) -> Result<SeedRun> {
    let wrap = |period: usize, selector: &str| {
        let selector = selector.to_string();
        move |e: Error| Error::Run {
            seed,
            period,
            selector,
            source: Box::new(e),
        }
    };
    let needs_grid = selectors.iter().any(|s| !matches!(s, Selector::FixedCv { .. }));
    let mut logs: Vec<PredictionLog> = selectors.iter().map(|s| PredictionLog::new(s.name())).collect();
    let mut selections = Vec::new();
    let mut traces = Vec::new();
    let mut once: Option<SplitPanel> = None;
    if config.split_mode == SplitMode::OncePerRun && needs_grid {
        once = Some(panel::split(panel, config.train_fraction, seed).map_err(wrap(0, "split"))?);
    }

    for t in config.warmup + 1..=panel.num_periods() {
        let fresh;
        let splits = match (&once, needs_grid) {
            (Some(s), _) => Some(s),
            (None, true) => {
                let key = rng::substream_key(seed, domain::RESPLIT, t as u64);
                fresh = panel::split(panel, config.train_fraction, key).map_err(wrap(t, "split"))?;
                Some(&fresh)
            }
            (None, false) => None,
        };
        let (candidates, losses) = match splits {
            Some(splits) => {
                let candidates = build_candidate_grid(t, splits, &config.grid, exec).map_err(wrap(t, "grid"))?;
                let losses = exec
                    .try_map_range(candidates.len(), |i| gapscan::validation_losses(&candidates[i], splits, t))
                    .map_err(wrap(t, "grid"))?;
                (candidates, losses)
            }
            None => (Vec::new(), Vec::new()),
        };
        let current = panel.period(t);

        for (s, selector) in selectors.iter().enumerate() {
            let name = selector.name();
            let cv_model;
            let (model, duel_count, final_window): (&FittedModel, usize, Option<usize>) = match selector {
                Selector::Atoms { r2, cfg, schedule, .. } => {
                    let splits = splits.expect("grid selectors have a split");
                    let cfg = delta_for(*schedule, cfg, candidates.len(), t);
                    let moments = if *r2 {
                        Some(gapscan::second_moments(splits, t).map_err(wrap(t, name))?)
                    } else {
                        None
                    };
                    let duel = |p: usize, c: usize| {
                        let stream = LossDifferenceStream::from_losses(&losses[p], &losses[c])?;
                        match &moments {
                            Some(m) => duel::duel_stream_r2(&stream, m, &cfg, false),
                            None => Ok(duel::duel_stream(&stream, &cfg, false)),
                        }
                    };
                    let pivot_seed = rng::substream_key(seed, domain::PIVOT, t as u64);
                    let trace = atoms::select_indices(candidates.len(), duel, pivot_seed, exec).map_err(wrap(t, name))?;
                    let out = (
                        &candidates[trace.winner],
                        trace.total_comparisons,
                        trace.final_duel().map(|d| d.outcome.chosen_window),
                    );
                    if config.keep_traces {
                        traces.push(TraceRecord {
                            period: t,
                            selector: name.to_string(),
                            trace,
                        });
                    }
                    out
                }
                Selector::FixedVal { window, .. } => {
                    let choice = baselines::fixed_val_from_losses(&losses, t, *window).map_err(wrap(t, name))?;
                    (&candidates[choice.chosen], 0, None)
                }
                Selector::FixedCv { window, folds, .. } => {
                    let key = rng::substream_key(seed, domain::CV_FOLDS, t as u64);
                    cv_model = baselines::fixed_cv(panel, t, &config.grid, *window, *folds, key, exec)
                        .map_err(wrap(t, name))?
                        .model;
                    (&cv_model, 0, None)
                }
            };
            let predictions: Vec<f64> = current.observations.iter().map(|o| model.predict(&o.x)).collect();
            let realized: Vec<f64> = current.observations.iter().map(|o| o.y).collect();
            logs[s].push(t, predictions, realized).map_err(wrap(t, name))?;
            selections.push(SelectionRecord {
                period: t,
                selector: name.to_string(),
                family: model.specification.family().to_string(),
                hyperparameters: model.specification.hyperparameters(),
                window_k: model.window_exponent,
                effective_window: model.effective_window,
                duel_count,
                final_window,
            });
        }
    }

    let wealth = logs
        .iter()
        .map(|log| match metrics::wealth_curve(log) {
            Ok(curve) => Some(curve),
            Err(e) => {
                log::info!("seed {seed}, selector {}: no wealth curve ({e})", log.tag);
                None
            }
        })
        .collect();
    Ok(SeedRun {
        seed,
        logs,
        selections,
        wealth,
        traces,
    })
}

fn metric_or_none(metric: Metric, log: &PredictionLog, window: &RegimeWindow) -> Result<Option<f64>> {
    match metric.evaluate(log, window) {
        Ok(v) => Ok(Some(v)),
        Err(Error::DegenerateDenominator | Error::ZeroVariance | Error::InvalidInput(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn window_metrics(runs: &[SeedRun], s: usize, window: &RegimeWindow) -> Result<WindowMetrics> {
    let mut zero = Vec::with_capacity(runs.len());
    let mut standard = Vec::with_capacity(runs.len());
    for run in runs {
        zero.push(metric_or_none(Metric::R2Zero, &run.logs[s], window)?);
        standard.push(metric_or_none(Metric::R2Standard, &run.logs[s], window)?);
    }
    Ok(WindowMetrics {
        label: window.label.clone(),
        start: window.start,
        end: window.end,
        r2_zero: SeedAverage::new(zero),
        r2_standard: SeedAverage::new(standard),
    })
}

fn summarize(
    names: &[String],
    runs: &[SeedRun],
    regimes: &[RegimeWindow],
    labels: Option<&[String]>,
) -> Result<Vec<SelectorSummary>> {
    names
        .iter()
        .enumerate()
        .map(|(s, name)| {
            let reference = &runs[0].logs[s];
            let overall = window_metrics(runs, s, &RegimeWindow::all(reference))?;
            // Years come from the period layout, which every seed shares.
            let years = metrics::annual_r2(reference, labels, Metric::R2Zero)?;
            let annual = years
                .iter()
                .map(|y| {
                    window_metrics(
                        runs,
                        s,
                        &RegimeWindow {
                            label: y.year.clone(),
                            start: y.start,
                            end: y.end,
                        },
                    )
                })
                .collect::<Result<_>>()?;
            let regimes = regimes
                .iter()
                .map(|w| window_metrics(runs, s, w))
                .collect::<Result<_>>()?;
            let final_wealth = SeedAverage::new(
                runs.iter()
                    .map(|r| r.wealth[s].as_ref().and_then(|c| c.last()).map(|w| w.wealth))
                    .collect(),
            );
            Ok(SelectorSummary {
                selector: name.clone(),
                overall,
                annual,
                regimes,
                final_wealth,
            })
        })
        .collect()
}

/// Final-wealth ratio of every ATOMS selector against every baseline, per seed.
fn excess_ratios(selectors: &[Selector], runs: &[SeedRun]) -> Result<Vec<ExcessRatioRow>> {
    let final_wealth = |run: &SeedRun, s: usize| run.wealth[s].as_ref().and_then(|c| c.last()).map(|w| w.wealth);
    let mut rows = Vec::new();
    for (a, sa) in selectors.iter().enumerate().filter(|(_, s)| s.is_atoms()) {
        for (b, sb) in selectors.iter().enumerate().filter(|(_, s)| !s.is_atoms()) {
            let per_seed = runs
                .iter()
                .map(|r| match (final_wealth(r, a), final_wealth(r, b)) {
                    (Some(wa), Some(wb)) => metrics::excess_ratio(wa, wb).map(Some),
                    _ => Ok(None),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(ExcessRatioRow {
                selector: sa.name().to_string(),
                baseline: sb.name().to_string(),
                ratio: SeedAverage::new(per_seed),
            });
        }
    }
    Ok(rows)
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|source| Error::Output {
            path: path.to_path_buf(),
            source,
        })
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Output {
        path: path.to_path_buf(),
        source,
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the report files into `outdir` and returns their paths.
///
/// `metrics.json` holds the report minus predictions and timing and is
/// byte-identical across runs of the same configuration.
pub fn emit(report: &BacktestReport, outdir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if report.selectors.is_empty() {
        return Err(Error::invalid("report has no selectors"));
    }
    let dir = outdir.as_ref();
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let mut written = Vec::new();

    let path = dir.join("metrics.json");
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(&path, json).map_err(io_at(&path))?;
    written.push(path);

    let path = dir.join("timing.json");
    fs::write(&path, serde_json::to_string_pretty(&report.timing)? + "\n").map_err(io_at(&path))?;
    written.push(path);

    let path = dir.join("predictions.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["seed", "selector", "period", "index", "prediction", "realized"])?;
    for run in &report.runs {
        for log in &run.logs {
            for r in &log.records {
                for (i, (p, y)) in r.predictions.iter().zip(&r.realized).enumerate() {
                    w.write_record([
                        run.seed.to_string(),
                        log.tag.clone(),
                        r.period.to_string(),
                        i.to_string(),
                        p.to_string(),
                        y.to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush().map_err(io_at(&path))?;
    written.push(path);

    let path = dir.join("selections.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record([
        "seed",
        "period",
        "selector",
        "family",
        "hyperparameters",
        "window_k",
        "effective_window",
        "duel_count",
        "final_window",
    ])?;
    for run in &report.runs {
        for s in &run.selections {
            w.write_record([
                run.seed.to_string(),
                s.period.to_string(),
                s.selector.clone(),
                s.family.clone(),
                s.hyperparameters.clone(),
                opt(s.window_k),
                s.effective_window.to_string(),
                s.duel_count.to_string(),
                opt(s.final_window),
            ])?;
        }
    }
    w.flush().map_err(io_at(&path))?;
    written.push(path);

    let path = dir.join("wealth.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["seed", "selector", "period", "wealth"])?;
    for run in &report.runs {
        for (name, curve) in report.selectors.iter().zip(&run.wealth) {
            for p in curve.iter().flatten() {
                w.write_record([run.seed.to_string(), name.clone(), p.period.to_string(), p.wealth.to_string()])?;
            }
        }
    }
    w.flush().map_err(io_at(&path))?;
    written.push(path);

    for (file, svg) in plots(report) {
        let path = dir.join(file);
        match fs::File::create(&path).and_then(|mut f| f.write_all(svg.as_bytes())) {
            Ok(()) => written.push(path),
            Err(e) => log::warn!("could not write plot {}: {e}", path.display()),
        }
    }
    Ok(written)
}

fn plots(report: &BacktestReport) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for metric in [Metric::R2Zero, Metric::R2Standard] {
        let pick = |w: &WindowMetrics| match metric {
            Metric::R2Zero => w.r2_zero.clone(),
            Metric::R2Standard => w.r2_standard.clone(),
        };
        let groups: Vec<(String, Vec<f64>)> = report
            .summaries
            .iter()
            .map(|s| (s.selector.clone(), pick(&s.overall).per_seed.into_iter().flatten().collect()))
            .collect();
        out.push((
            format!("overall_{}.svg", metric.name()),
            plot::box_chart(&format!("Out-of-sample {} across seeds", metric.name()), metric.name(), &groups),
        ));
        let series: Vec<Series> = report
            .summaries
            .iter()
            .map(|s| Series {
                name: s.selector.clone(),
                points: s
                    .annual
                    .iter()
                    .enumerate()
                    .filter_map(|(i, y)| pick(y).mean.map(|v| (i as f64 + 1.0, v)))
                    .collect(),
            })
            .collect();
        out.push((
            format!("annual_{}.svg", metric.name()),
            plot::line_chart(&format!("Annual {} (seed mean)", metric.name()), "year", metric.name(), &series),
        ));
        if report.summaries.iter().any(|s| !s.regimes.is_empty()) {
            let groups: Vec<(String, Vec<f64>)> = report
                .summaries
                .iter()
                .flat_map(|s| {
                    s.regimes.iter().map(move |r| {
                        (format!("{}/{}", s.selector, r.label), pick(r).per_seed.into_iter().flatten().collect())
                    })
                })
                .collect();
            out.push((
                format!("regimes_{}.svg", metric.name()),
                plot::box_chart(&format!("{} by regime", metric.name()), metric.name(), &groups),
            ));
        }
    }
    let series: Vec<Series> = report
        .selectors
        .iter()
        .enumerate()
        .map(|(s, name)| Series {
            name: name.clone(),
            points: mean_wealth(report, s),
        })
        .collect();
    out.push((
        "wealth.svg".into(),
        plot::line_chart("Sign-trading wealth (seed mean)", "period", "wealth", &series),
    ));
    out
}

fn mean_wealth(report: &BacktestReport, s: usize) -> Vec<(f64, f64)> {
    let curves: Vec<&Vec<WealthPoint>> = report.runs.iter().filter_map(|r| r.wealth[s].as_ref()).collect();
    let Some(first) = curves.first() else {
        return Vec::new();
    };
    (0..first.len())
        .map(|i| {
            let mean = curves.iter().map(|c| c[i].wealth).sum::<f64>() / curves.len() as f64;
            (first[i].period as f64, mean)
        })
        .collect()
}
