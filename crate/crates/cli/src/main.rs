use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use atoms_lab::atoms;
use atoms_lab::duel;
use atoms_lab::exec;
use atoms_lab::gapscan::{self, ComparisonConfig};
use atoms_lab::harness::{self, RunConfig, SelectorConfig};
use atoms_lab::models::ModelSpec;
use atoms_lab::panel::{self, CsvSchema};
use atoms_lab::synth::{self, DriftEnv};
use clap::{Parser, Subcommand, ValueEnum};

/// Adaptive model and training-window selection under drift.
#[derive(Parser)]
#[command(name = "atoms-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a walk-forward backtest and write its report files.
    Backtest {
        #[arg(long)]
        config: PathBuf,
        /// Run this single seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        max_lookback: Option<usize>,
    },
    /// Draw a synthetic panel and save it as CSV.
    Simulate {
        /// JSON file describing the environment.
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        periods: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare two candidates at one period and print the gap scan as CSV.
    Duel {
        #[arg(long)]
        config: PathBuf,
        /// First model, e.g. `ridge:alpha=1,k=2`.
        #[arg(long)]
        f1: String,
        /// Second model, e.g. `rf:trees=100,depth=3,k=5`.
        #[arg(long)]
        f2: String,
        /// Decision period; defaults to one past the last period.
        #[arg(long)]
        period: Option<usize>,
        #[arg(long, value_enum, default_value_t = DuelMetric::Mse)]
        metric: DuelMetric,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_lookback: Option<usize>,
    },
    /// Measure mean tournament comparisons for several candidate counts.
    Complexity {
        #[arg(long, value_delimiter = ',', required = true)]
        lambda_list: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DuelMetric {
    Mse,
    R2,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = exec::init_threads_from_env() {
        log::info!("using {n} worker threads");
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Backtest {
            config,
            seed,
            out,
            max_lookback,
        } => backtest(config, seed, out, max_lookback),
        Command::Simulate {
            env,
            periods,
            out,
            seed,
        } => simulate(env, periods, out, seed),
        Command::Duel {
            config,
            f1,
            f2,
            period,
            metric,
            seed,
            max_lookback,
        } => run_duel(config, &f1, &f2, period, metric, seed, max_lookback),
        Command::Complexity {
            lambda_list,
            trials,
            seed,
        } => complexity(&lambda_list, trials, seed),
    }
}

fn load_config(path: &PathBuf) -> Result<RunConfig> {
    RunConfig::from_json_file(path).with_context(|| format!("reading config {}", path.display()))
}

fn backtest(config: PathBuf, seed: Option<u64>, out: Option<PathBuf>, max_lookback: Option<usize>) -> Result<()> {
    let mut cfg = load_config(&config)?;
    if let Some(seed) = seed {
        cfg.seeds = vec![seed];
    }
    if max_lookback.is_some() {
        cfg.max_lookback = max_lookback;
    }
    let outdir = out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("atoms-lab-out"));
    let report = harness::run(&cfg)?;
    let files = harness::emit(&report, &outdir)?;
    println!("selector,r2_zero,r2_standard,final_wealth");
    for s in &report.summaries {
        println!(
            "{},{},{},{}",
            s.selector,
            fmt(s.overall.r2_zero.mean),
            fmt(s.overall.r2_standard.mean),
            fmt(s.final_wealth.mean)
        );
    }
    eprintln!(
        "{} seeds, periods {}..={}, {:.2}s; wrote {} files to {}",
        report.seeds.len(),
        report.first_period,
        report.last_period,
        report.timing.total_seconds,
        files.len(),
        outdir.display()
    );
    Ok(())
}

fn fmt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_else(|| "NA".into())
}

fn simulate(env: PathBuf, periods: usize, out: PathBuf, seed: Option<u64>) -> Result<()> {
    let text = fs::read_to_string(&env).with_context(|| format!("reading {}", env.display()))?;
    let mut env: DriftEnv = serde_json::from_str(&text).context("parsing environment")?;
    if let Some(seed) = seed {
        env.seed = seed;
    }
    let panel = synth::generate(&env, periods)?;
    panel::save_csv(&panel, &out, &CsvSchema::default())?;
    eprintln!("wrote {} observations to {}", panel.total_observations(), out.display());
    Ok(())
}

fn run_duel(
    config: PathBuf,
    f1: &str,
    f2: &str,
    period: Option<usize>,
    metric: DuelMetric,
    seed: Option<u64>,
    max_lookback: Option<usize>,
) -> Result<()> {
    let cfg = load_config(&config)?;
    let f1: ModelSpec = f1.parse()?;
    let f2: ModelSpec = f2.parse()?;
    let panel = cfg.data.load()?;
    let t = period.unwrap_or(panel.num_periods() + 1);
    if t < 2 || t > panel.num_periods() + 1 {
        bail!("period must lie in 2..={}", panel.num_periods() + 1);
    }
    let seed = seed.or(cfg.seeds.first().copied()).unwrap_or(0);
    let splits = panel::split(&panel, cfg.train_fraction, seed)?;
    let a = f1.fit_at(t, &splits, cfg.execution)?;
    let b = f2.fit_at(t, &splits, cfg.execution)?;

    let mut comparison = ComparisonConfig::default();
    for s in &cfg.selectors {
        match (metric, s) {
            (DuelMetric::Mse, SelectorConfig::AtomsMse { delta_prime, m_squared, .. }) => {
                comparison.delta_prime = *delta_prime;
                comparison.m_squared = *m_squared;
            }
            (
                DuelMetric::R2,
                SelectorConfig::AtomsR2 {
                    delta_prime,
                    m_squared,
                    v_floor,
                    ..
                },
            ) => {
                comparison.delta_prime = *delta_prime;
                comparison.m_squared = *m_squared;
                comparison.v_floor = *v_floor;
            }
            _ => {}
        }
    }
    if matches!(metric, DuelMetric::R2) && !cfg.selectors.iter().any(|s| matches!(s, SelectorConfig::AtomsR2 { .. })) {
        comparison.m_squared = 5.0;
    }
    comparison.max_lookback = max_lookback.or(cfg.max_lookback);
    comparison.validate()?;

    let outcome = match metric {
        DuelMetric::Mse => duel::duel_mse(&a, &b, &splits, t, &comparison)?,
        DuelMetric::R2 => duel::duel_r2(&a, &b, &splits, t, &comparison)?,
    };
    let rows = outcome.scan.as_deref().unwrap_or_default();
    gapscan::write_scan_csv(rows, std::io::stdout().lock())?;
    let winner = if outcome.first_wins() { &a } else { &b };
    eprintln!(
        "period {t}: winner {} (chosen window {}, delta_hat {:.6e})",
        winner.label(),
        outcome.chosen_window,
        outcome.delta_hat_at_choice
    );
    Ok(())
}

fn complexity(lambdas: &[usize], trials: usize, seed: u64) -> Result<()> {
    if trials == 0 || lambdas.contains(&0) {
        bail!("trials and every lambda must be at least 1");
    }
    println!("lambda,mean_comparisons,per_candidate");
    for &lambda in lambdas {
        let mean = atoms::measure_complexity(lambda, trials, seed);
        println!("{lambda},{mean:.4},{:.4}", mean / lambda as f64);
    }
    Ok(())
}
