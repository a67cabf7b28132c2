//! `el`: empirical-likelihood tests, confidence regions and Monte Carlo
//! sweeps for the phase-parameter difference of two-phase nonlinear
//! regression, with complete or missing-at-random responses.

mod io;
mod runconfig;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use el_twophase::inference::{PiSource, PreparedTest, TestOptions};
use el_twophase::missing::MissingMethod;
use el_twophase::model::builtin_model;
use el_twophase::sim;

use io::{write_atomic, CliError};
use runconfig::{MethodTag, OutputFormat, PiSpec, RunConfig};

#[derive(Parser)]
#[command(
    name = "el",
    about = "Empirical-likelihood inference for two-phase nonlinear regression",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test one hypothesized phase-parameter difference on one dataset.
    Test(TestArgs),
    /// Summarize the confidence region around a center difference.
    Region(RegionArgs),
    /// Run Monte Carlo scenario sweeps and report coverage.
    Simulate(SimulateArgs),
}

#[derive(Args, Clone)]
struct CommonDataArgs {
    /// CSV input with header `x1,...,xp,y[,delta]`; empty `y` with
    /// `delta=0` marks a missing response.
    #[arg(long)]
    input: Option<String>,
    /// Built-in generated dataset, e.g.
    /// `model=1,case=a,n=1000,k=300,seed=1[,study=1][,noiseless]`.
    #[arg(long)]
    builtin: Option<String>,
    /// Model identifier (`paper-ratio`).
    #[arg(long)]
    model: Option<String>,
    /// Change index splitting the phases (required for CSV input).
    #[arg(long)]
    k: Option<usize>,
    /// Test level in (0, 1).
    #[arg(long)]
    alpha: Option<f64>,
    /// Method: complete, complete-case, weighted or imputed.
    #[arg(long)]
    method: Option<String>,
    /// Selection probabilities for missing-data methods: `kernel`,
    /// `study1`, `study2`, `study3` or `const:<p>`.
    #[arg(long)]
    pi: Option<String>,
    /// Kernel bandwidths `h1,h2` (defaults to the per-phase rates).
    #[arg(long)]
    bandwidths: Option<String>,
    /// Least-squares starts `a,b` or `a,b;a,b` (grid search when absent).
    #[arg(long)]
    init: Option<String>,
    /// JSON config file; command-line flags override its keys.
    #[arg(long)]
    config: Option<String>,
    /// Report path (stdout when absent). Reports are written atomically.
    #[arg(long)]
    output: Option<String>,
}

#[derive(Args, Clone)]
struct TestArgs {
    #[command(flatten)]
    data: CommonDataArgs,
    /// Hypothesized difference, comma-separated.
    #[arg(long)]
    delta0: Option<String>,
}

#[derive(Args, Clone)]
struct RegionArgs {
    #[command(flatten)]
    data: CommonDataArgs,
    /// Region center: `auto` (difference of the phase fits) or values.
    #[arg(long)]
    center: Option<String>,
}

#[derive(Args, Clone)]
struct SimulateArgs {
    /// Response model: 1 or 2.
    #[arg(long)]
    model: Option<String>,
    /// Error cases, comma-separated subset of a,b,c.
    #[arg(long)]
    case: Option<String>,
    /// Missingness study: none, 1, 2 or 3.
    #[arg(long)]
    study: Option<String>,
    /// Sample size.
    #[arg(long)]
    n: Option<usize>,
    /// Change indices, comma-separated.
    #[arg(long)]
    k: Option<String>,
    /// Test level.
    #[arg(long)]
    alpha: Option<f64>,
    /// Methods, comma-separated.
    #[arg(long)]
    method: Option<String>,
    /// Replications per scenario cell.
    #[arg(long)]
    reps: Option<usize>,
    /// Base seed; replication r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    /// Selection-probability source: estimate (kernel) or known.
    #[arg(long)]
    pi_mode: Option<String>,
    /// Skip region-length computation (coverage only).
    #[arg(long)]
    no_lcr: bool,
    /// JSON config file; flags override.
    #[arg(long)]
    config: Option<String>,
    /// Report path (stdout when absent).
    #[arg(long)]
    output: Option<String>,
    /// Report format: json or csv.
    #[arg(long)]
    format: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    let result = match cli.command {
        Command::Test(args) => run_test(args),
        Command::Region(args) => run_region(args),
        Command::Simulate(args) => run_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn init_threads() {
    if let Ok(v) = std::env::var("EL_THREADS") {
        if let Ok(threads) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build_global();
        }
    }
}

fn prepare<'a>(
    config: &RunConfig,
    data: &'a el_twophase::Dataset,
    model: &'a el_twophase::RegressionModel,
) -> Result<PreparedTest<'a>, CliError> {
    if let Some((h1, h2)) = config.bandwidths {
        warn_bandwidth_rate(h1, data.k(), model.d(), "first");
        warn_bandwidth_rate(h2, data.n() - data.k(), model.d(), "second");
    }
    let opts = TestOptions {
        nls_init: config.init.clone(),
        profile: None,
    };
    let prepared = match config.method {
        MethodTag::Complete => PreparedTest::complete(data, model, &opts),
        MethodTag::CompleteCase | MethodTag::Weighted | MethodTag::Imputed => {
            let method = match config.method {
                MethodTag::CompleteCase => MissingMethod::CompleteCase,
                MethodTag::Weighted => MissingMethod::Weighted,
                MethodTag::Imputed => MissingMethod::Imputed,
                MethodTag::Complete => unreachable!(),
            };
            let pi_source = pi_source_of(&config.pi, config.bandwidths)?;
            PreparedTest::missing(data, model, method, &pi_source, &opts)
        }
    };
    prepared.map_err(CliError::computation)
}

/// The kernel consistency rate wants `m * h^(4 max(2, d-1))` small; warn
/// when a user bandwidth leaves that regime at this sample size.
fn warn_bandwidth_rate(h: f64, m: usize, d: usize, phase: &str) {
    let exponent = 4 * 2usize.max(d.saturating_sub(1));
    let size = m as f64 * h.powi(exponent as i32);
    if size > 1.0 {
        eprintln!(
            "warning: {phase}-phase bandwidth {h} is large for {m} observations \
             (m * h^{exponent} = {size:.2}); the selection-probability estimate \
             may be oversmoothed"
        );
    }
}

fn pi_source_of(spec: &PiSpec, bandwidths: Option<(f64, f64)>) -> Result<PiSource, CliError> {
    Ok(match spec {
        PiSpec::Kernel => PiSource::Estimate {
            kernel: el_twophase::Kernel::Epanechnikov,
            bandwidths,
        },
        PiSpec::Constant(c) => PiSource::constant(*c),
        PiSpec::Study(study) => {
            let s = *study;
            PiSource::Known {
                pi1: std::sync::Arc::new(move |x: &[f64]| runconfig::study_pi1(s, x[0])),
                pi2: std::sync::Arc::new(move |x: &[f64]| runconfig::study_pi2(s, x[0])),
            }
        }
    })
}

fn load_model(config: &RunConfig) -> Result<el_twophase::RegressionModel, CliError> {
    builtin_model(&config.model).ok_or_else(|| {
        CliError::usage(format!(
            "unknown model id '{}' (available: paper-ratio)",
            config.model
        ))
    })
}

fn run_test(args: TestArgs) -> Result<(), CliError> {
    let config = RunConfig::for_test(&args.data, args.delta0.as_deref())?;
    let model = load_model(&config)?;
    let data = io::load_dataset(&config, &model)?;
    let delta0 = config
        .delta0
        .clone()
        .ok_or_else(|| CliError::usage("--delta0 is required for `el test`"))?;
    if delta0.len() != model.d() {
        return Err(CliError::usage(format!(
            "--delta0 must have {} coordinates",
            model.d()
        )));
    }
    let prepared = prepare(&config, &data, &model)?;
    let result = prepared
        .test(&delta0, config.alpha)
        .map_err(CliError::computation)?;
    let report = io::TestReport::new(&config, &prepared, &result);
    emit(&config.output, &serde_json::to_string_pretty(&report).unwrap())
}

fn run_region(args: RegionArgs) -> Result<(), CliError> {
    let config = RunConfig::for_region(&args.data, args.center.as_deref())?;
    let model = load_model(&config)?;
    let data = io::load_dataset(&config, &model)?;
    let prepared = prepare(&config, &data, &model)?;
    let center = match &config.center {
        Some(c) => {
            if c.len() != model.d() {
                return Err(CliError::usage(format!(
                    "--center must have {} coordinates",
                    model.d()
                )));
            }
            c.clone()
        }
        None => prepared.delta_hat(),
    };
    let region = prepared
        .region(config.alpha, &center)
        .map_err(CliError::computation)?;
    let report = io::RegionReport::new(&config, &prepared, &region);
    emit(&config.output, &serde_json::to_string_pretty(&report).unwrap())
}

fn run_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let grid = runconfig::SimulateConfig::resolve(&args)?;
    let mut reports = Vec::new();
    for scenario in grid.scenarios() {
        scenario
            .validate()
            .map_err(|e| CliError::usage(e.to_string()))?;
        let report = sim::run_study(&scenario).map_err(CliError::computation)?;
        reports.push(report);
    }
    let rendered = match grid.format {
        OutputFormat::Json => io::render_simulate_json(&grid, &reports),
        OutputFormat::Csv => io::render_simulate_csv(&reports),
    };
    emit(&grid.output, &rendered)
}

fn emit(output: &Option<String>, content: &str) -> Result<(), CliError> {
    match output {
        Some(path) => write_atomic(path, content),
        None => {
            println!("{content}");
            Ok(())
        }
    }
}
