//! Command-line driver: experiment runner, training-table and
//! convergence-trace generators, direct bound computations, closed-form
//! calculators, and polytope-norm certification.
//!
//! Exit codes: 0 success, 2 configuration error (including malformed
//! JSON and usage errors), 4 enumeration budget exhausted, 3 any other
//! failure. The JSRLAB_WORKERS environment variable caps how many seeds
//! run in parallel.

use clap::{Args, Parser, Subcommand};
use jsrlab::bounds::theory;
use jsrlab::error::{Error, Result};
use jsrlab::harness::{self, BenchmarkSpec, ExperimentConfig, MethodConfig};
use jsrlab::neural::{sample_sphere, TrainConfig};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "jsrlab", version, about = "Joint spectral radius estimation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file.
    Run(RunArgs),
    /// Reproduce the layers-by-width training table on the planar benchmark.
    Table1(Table1Args),
    /// Emit per-seed convergence traces and min/mean/max bands.
    Trace(TraceArgs),
    /// Compute a single lower or upper bound directly.
    #[command(subcommand)]
    Bounds(BoundsCommand),
    /// Closed-form certificate-complexity calculators.
    #[command(subcommand)]
    Theory(TheoryCommand),
    /// Build a polytope norm from a trained network and certify the bound.
    Certify(CertifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment description (JSON; see the README for the schema).
    #[arg(long)]
    config: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// For the neural method: also write the best seed's network here.
    #[arg(long)]
    network_out: Option<PathBuf>,
}

#[derive(Args)]
struct Table1Args {
    /// Seeds per (layers, width) cell.
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    /// Training samples per run.
    #[arg(long, default_value_t = 500)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    /// Override the per-run epoch budget (mainly for smoke tests).
    #[arg(long)]
    epochs: Option<usize>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    /// Benchmark name (sigma2, sigma8, colmodes<n>).
    #[arg(long)]
    benchmark: String,
    #[arg(long, default_value_t = 1)]
    layers: usize,
    #[arg(long)]
    width: usize,
    #[arg(long, default_value_t = 500)]
    samples: usize,
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    /// Per-seed trace CSV destination.
    #[arg(long)]
    out_traces: PathBuf,
    /// Aggregate band CSV destination.
    #[arg(long)]
    out_bands: PathBuf,
}

#[derive(Subcommand)]
enum BoundsCommand {
    /// Best lower bound from matrix products up to a maximum length.
    Lower(LowerArgs),
    /// Ellipsoidal-norm upper bound via projected subgradient descent.
    Ellipsoid(EllipsoidArgs),
}

#[derive(Args)]
struct LowerArgs {
    #[arg(long)]
    benchmark: String,
    /// Longest product length to enumerate.
    #[arg(long)]
    max_length: usize,
    /// Abort if the enumeration would visit more words than this.
    #[arg(long)]
    cap: Option<u64>,
    /// Skip words whose prefix already proves them dominated.
    #[arg(long)]
    prune: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EllipsoidArgs {
    #[arg(long)]
    benchmark: String,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 800)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum TheoryCommand {
    /// Evaluate every calculator applicable to the given arguments.
    Calc(TheoryCalcArgs),
    /// Variable-count table: piecewise-linear vs SOS certificates by dimension.
    Table(TheoryTableArgs),
}

#[derive(Args)]
struct TheoryCalcArgs {
    /// Ambient dimension.
    #[arg(long)]
    n: u64,
    /// Precision factor (> 1) for the vertex-count and structure bounds.
    #[arg(long)]
    tau: Option<f64>,
    /// SOS half-degree for the precision-factor calculator.
    #[arg(long)]
    d: Option<u64>,
    /// Vertex parameter for the direct vertex/face counts.
    #[arg(long)]
    k: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TheoryTableArgs {
    /// SOS half-degree fixing the matched precision per row.
    #[arg(long)]
    d: u64,
    #[arg(long, default_value_t = 2)]
    n_min: u64,
    #[arg(long, default_value_t = 30)]
    n_max: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    benchmark: String,
    /// Trained network parameters (JSON).
    #[arg(long)]
    network: PathBuf,
    /// Unit-sphere sample set (JSON).
    #[arg(long, conflicts_with = "sample_count")]
    samples: Option<PathBuf>,
    /// Draw this many fresh unit-sphere samples instead of loading a file.
    #[arg(long)]
    sample_count: Option<usize>,
    #[arg(long, default_value_t = 0)]
    sample_seed: u64,
    /// Degeneracy threshold: samples with V below this are dropped.
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = dispatch(cli.command) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn dispatch(command: Command) -> Result<()> {
    let workers = harness::workers_from_env();
    match command {
        Command::Run(args) => {
            let config = harness::load_experiment_config(&args.config)?;
            let report = harness::run_experiment(&config, workers)?;
            if let Some(path) = &args.network_out {
                let network = &report.computed["best_network"];
                if network.is_null() {
                    return Err(Error::Config(
                        "--network-out requires the neural method".into(),
                    ));
                }
                harness::write_json(network, path)?;
            }
            emit_json(&report, args.out.as_deref())
        }
        Command::Table1(args) => {
            let csv = harness::table1_repro_detailed(
                args.seeds,
                args.samples,
                args.seed_base,
                args.epochs,
                workers,
            )?;
            emit_text(&csv, args.out.as_deref())
        }
        Command::Trace(args) => {
            let set = harness::benchmark(&args.benchmark)?;
            let defaults = TrainConfig::default();
            let config = TrainConfig {
                hidden_layers: args.layers,
                width: args.width,
                n_samples: args.samples,
                n_seeds: args.seeds.max(1),
                epochs: args.epochs.unwrap_or(defaults.epochs),
                ..defaults
            };
            let seeds: Vec<u64> = (0..args.seeds as u64)
                .map(|i| args.seed_base + i)
                .collect();
            let trace = harness::convergence_trace(&set, &config, &seeds, workers)?;
            harness::write_text(&trace.traces_csv, &args.out_traces)?;
            harness::write_text(&trace.bands_csv, &args.out_bands)?;
            Ok(())
        }
        Command::Bounds(BoundsCommand::Lower(args)) => {
            let config = ExperimentConfig {
                benchmark: BenchmarkSpec::Name(args.benchmark),
                method: MethodConfig::Lower {
                    max_length: args.max_length,
                    cap: args.cap,
                    prune: Some(args.prune),
                },
                seed_base: 0,
            };
            let report = harness::run_experiment(&config, workers)?;
            emit_json(&report, args.out.as_deref())
        }
        Command::Bounds(BoundsCommand::Ellipsoid(args)) => {
            let config = ExperimentConfig {
                benchmark: BenchmarkSpec::Name(args.benchmark),
                method: MethodConfig::Ellipsoid {
                    restarts: Some(args.restarts),
                    iters: Some(args.iters),
                },
                seed_base: args.seed,
            };
            let report = harness::run_experiment(&config, workers)?;
            emit_json(&report, args.out.as_deref())
        }
        Command::Theory(TheoryCommand::Calc(args)) => {
            let query = theory::TheoryQuery {
                n: args.n,
                tau: args.tau,
                d: args.d,
                k: args.k,
            };
            query.validate()?;
            let report = harness::theory_report(&query)?;
            emit_json(&report, args.out.as_deref())
        }
        Command::Theory(TheoryCommand::Table(args)) => {
            if args.n_min > args.n_max {
                return Err(Error::Config("n_min must not exceed n_max".into()));
            }
            let dims: Vec<u64> = (args.n_min..=args.n_max).collect();
            let csv = harness::variables_comparison_csv(&dims, args.d)?;
            emit_text(&csv, args.out.as_deref())
        }
        Command::Certify(args) => {
            let params = harness::load_network(&args.network)?;
            let samples = match (&args.samples, args.sample_count) {
                (Some(path), _) => harness::load_samples(path)?,
                (None, Some(count)) => {
                    sample_sphere(params.input_dim(), count, args.sample_seed)?
                }
                (None, None) => {
                    return Err(Error::Config(
                        "provide --samples <file> or --sample-count <n>".into(),
                    ))
                }
            };
            let report = harness::run_certification(
                &BenchmarkSpec::Name(args.benchmark),
                &params,
                &samples,
                args.eps,
            )?;
            emit_json(&report, args.out.as_deref())
        }
    }
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => harness::write_json(value, path),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn emit_text(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => harness::write_text(text, path),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
