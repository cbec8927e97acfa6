//! `guided-es`: run experiments and export analysis grids as CSV.

use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use guided_es::analysis::{error_surface, regime_map};
use guided_es::harness::{
    aggregate, emit_csv, emit_regimes_csv, emit_surface_csv, render_csv, run_experiment, Algorithm, Experiment,
    ExperimentSpec,
};

/// Environment variable capping the number of worker threads.
const THREADS_ENV: &str = "GUIDED_ES_THREADS";

#[derive(Parser)]
#[command(name = "guided-es", version, about = "Guided evolutionary strategies experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded experiment and write aggregated traces.
    Run(RunArgs),
    /// Export the normalized bias/variance surface over (alpha, beta).
    Surface(SurfaceArgs),
    /// Export optimal (alpha, beta) for every k and a grid of correlations.
    Regimes(RegimesArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_parser = parse_name::<Experiment>)]
    experiment: Experiment,
    #[arg(long, value_parser = parse_name::<Algorithm>)]
    algorithm: Algorithm,
    /// Inclusive range `a..b` or a comma-separated list.
    #[arg(long, default_value = "0..9", value_parser = parse_seeds)]
    seeds: Seeds,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long = "subspace-dim")]
    subspace_dim: Option<usize>,
    /// Problem size: N for the quadratic (M = 2N), n for the synthetic problem.
    #[arg(long)]
    dim: Option<usize>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SurfaceArgs {
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0.23)]
    rho: f64,
    #[arg(long, default_value_t = 400)]
    grid: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RegimesArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Number of correlation values in [0, 1].
    #[arg(long, default_value_t = 101)]
    grid: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Debug)]
struct Seeds(Vec<u64>);

fn parse_name<T: std::str::FromStr<Err = guided_es::harness::HarnessError>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: guided_es::harness::HarnessError| e.to_string())
}

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    let err = |_| format!("invalid seed list `{s}`");
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let range: RangeInclusive<u64> = a.trim().parse().map_err(err)?..=b.trim().parse().map_err(err)?;
        range.collect()
    } else {
        s.split(',')
            .map(|v| v.trim().parse().map_err(err))
            .collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(format!("seed list `{s}` is empty"));
    }
    Ok(Seeds(seeds))
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .with_context(|| format!("{THREADS_ENV} must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the thread pool")?;
    Ok(())
}

fn spec_from(args: &RunArgs) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::defaults(args.experiment, args.algorithm)?;
    spec.seeds = args.seeds.0.clone();
    if let Some(v) = args.iterations {
        spec.iterations = v;
    }
    if let Some(v) = args.lr {
        spec.learning_rate = v;
    }
    if let Some(v) = args.alpha {
        spec.cfg.alpha = v;
    }
    if let Some(v) = args.beta {
        spec.cfg.beta = v;
    }
    if let Some(v) = args.sigma {
        spec.cfg.sigma = v;
    }
    if let Some(v) = args.pairs {
        spec.cfg.pairs = v;
    }
    if let Some(v) = args.subspace_dim {
        spec.cfg.subspace_dim = v;
    }
    spec.dim = args.dim;
    spec.validate()?;
    Ok(spec)
}

fn run(args: &RunArgs) -> Result<()> {
    let spec = spec_from(args)?;
    let runs = run_experiment(&spec)?;
    for r in runs.iter().filter(|r| !r.completed()) {
        eprintln!("seed {} failed: {}", r.seed, r.failure.as_deref().unwrap_or_default());
    }
    let result = aggregate(&runs).context("aggregating seeds")?;
    if result.single_seed() {
        eprintln!("note: single seed, stderr and stddev columns are 0 by convention");
    }
    match &args.out {
        Some(path) => emit_csv(&result, path).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", render_csv(&result)?),
    }
    eprintln!(
        "{} / {}: {} seeds completed, {} failed",
        spec.experiment,
        spec.algorithm,
        result.completed_seeds,
        result.failed_seeds.len()
    );
    Ok(())
}

fn written(path: &Path) {
    eprintln!("wrote {}", path.display());
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    configure_threads()?;
    match &cli.command {
        Command::Run(args) => run(args)?,
        Command::Surface(a) => {
            if a.grid < 2 {
                bail!("--grid must be at least 2");
            }
            emit_surface_csv(&error_surface(a.k, a.n, a.rho, a.grid)?, &a.out)?;
            written(&a.out);
        }
        Command::Regimes(a) => {
            if a.grid < 2 {
                bail!("--grid must be at least 2");
            }
            emit_regimes_csv(&regime_map(a.n, a.grid)?, &a.out)?;
            written(&a.out);
        }
    }
    Ok(())
}
