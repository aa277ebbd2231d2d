//! Command-line interface.

use std::path::PathBuf;
use std::process::ExitCode;

use agora_core::analysis::conversation_metrics;
use agora_core::Step;
use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use crate::ensemble::{build_oracle, execute_run, run_ensemble, trace_path, RayonExecutor};
use crate::report::{analyze_dir, write_report};
use crate::remote::ENDPOINT_ENV;
use crate::settings::{Backend, Overrides, Settings};
use crate::trace_io::save_trace;

pub const DEFAULT_OUT: &str = "agora-out";

#[derive(Debug, Parser)]
#[command(name = "agora", version, about = "Argumentative opinion dynamics with language-model agents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one conversation and print its metrics.
    Run(RunArgs),
    /// Run an ensemble for one scenario or the full grid.
    Ensemble(EnsembleArgs),
    /// Compute metrics and report files from a directory of traces.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Corpus file (line-delimited JSON).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub backend: Option<Backend>,
    /// Base URL of the scoring service.
    #[arg(long, env = ENDPOINT_ENV)]
    pub endpoint: Option<String>,
    /// Scenario label, e.g. `homophily-listening`.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Step at which metrics are evaluated.
    #[arg(long)]
    pub evaluate_at: Option<Step>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Runs per scenario.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Parallel runs (0 = number of CPUs).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Run all twelve scenarios.
    #[arg(long)]
    pub grid: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Directory containing traces.
    pub dir: PathBuf,
    /// Where to write report files (default: the trace directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub evaluate_at: Option<Step>,
}

fn overrides(common: &CommonArgs) -> Overrides {
    Overrides {
        corpus: common.corpus.clone(),
        seed: common.seed,
        backend: common.backend,
        endpoint: common.endpoint.clone(),
        scenario: common.scenario.clone(),
        out: common.out.clone(),
        evaluate_at: common.evaluate_at,
        ..Overrides::default()
    }
}

fn load_settings(common: &CommonArgs, extra: impl FnOnce(&mut Overrides)) -> anyhow::Result<Settings> {
    let mut settings = match &common.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    let mut o = overrides(common);
    extra(&mut o);
    settings.apply(&o);
    Ok(settings.resolve()?)
}

fn out_dir(settings: &Settings) -> PathBuf {
    settings.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn cmd_run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let settings = load_settings(&args.common, |_| {})?;
    let corpus = settings.prepare_corpus()?;
    let oracle = build_oracle(&settings, &corpus)?;
    let config = &settings.simulation;
    let (trace, error) = execute_run(config, &settings.topic(), &corpus, &oracle, 0, &RayonExecutor);
    let out = out_dir(&settings);
    let path = out.join(trace_path(&trace.scenario_label(), 0));
    std::fs::create_dir_all(path.parent().expect("trace path has a parent"))?;
    save_trace(&trace, &path).with_context(|| format!("writing {}", path.display()))?;
    println!("scenario {}  seed {}  trace {}", trace.scenario_label(), trace.seed, path.display());
    if let Some(e) = error {
        eprintln!("run aborted after {} steps: {e}", trace.steps.len());
        return Ok(ExitCode::FAILURE);
    }
    let m = conversation_metrics(&trace, settings.analysis.evaluate_at)?;
    println!("evaluated_at     {}", m.evaluated_at);
    println!("coverage         {:.4}", m.coverage);
    println!("n_clusters       {}", m.n_clusters);
    println!("bipolarization   {}", m.bipolarization);
    println!("full_consensus   {}", m.full_consensus);
    println!("variance         {:.6}", m.variance);
    println!("max_min_spread   {:.4}", m.max_min_spread);
    println!("mean_volatility  {:.6}", m.mean_volatility);
    println!("mean_pertinence  {:.4}", m.mean_pertinence);
    Ok(ExitCode::SUCCESS)
}

fn cmd_ensemble(args: EnsembleArgs) -> anyhow::Result<ExitCode> {
    let settings = load_settings(&args.common, |o| {
        o.runs = args.runs;
        o.workers = args.workers;
        o.grid = args.grid;
    })?;
    let corpus = settings.prepare_corpus()?;
    let oracle = build_oracle(&settings, &corpus)?;
    let out = out_dir(&settings);
    let manifest = run_ensemble(&settings, &corpus, &oracle, &out)?;
    let total = manifest.runs.len();
    println!("{} runs, {} failed, manifest {}", total, manifest.failures, out.join("manifest.json").display());
    if manifest.failures > 0 {
        for r in manifest.runs.iter().filter(|r| r.error.is_some()) {
            eprintln!("{} run {}: {}", r.scenario, r.index, r.error.as_deref().unwrap_or(""));
        }
        return Ok(ExitCode::FAILURE);
    }
    let report = analyze_dir(&out, settings.analysis.evaluate_at)?;
    for path in write_report(&report, &out)? {
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_analyze(args: AnalyzeArgs) -> anyhow::Result<ExitCode> {
    let report = analyze_dir(&args.dir, args.evaluate_at)?;
    let out = args.out.unwrap_or_else(|| args.dir.clone());
    for path in write_report(&report, &out)? {
        println!("wrote {}", path.display());
    }
    for s in &report.scenarios {
        println!(
            "{:34} runs {:3}  coverage {:.3}  bipolar {:5.1}%  consensus {:5.1}%  variance {:.5}  volatility {:.6}",
            s.scenario, s.n_runs, s.coverage, s.bipolarization_ratio, s.full_consensus_ratio, s.variance, s.mean_volatility
        );
    }
    if report.skipped.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for s in &report.skipped {
            eprintln!("skipped {}: {}", s.path.display(), s.reason);
        }
        Ok(ExitCode::FAILURE)
    }
}

pub fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Ensemble(a) => cmd_ensemble(a),
        Command::Analyze(a) => cmd_analyze(a),
    }
}
