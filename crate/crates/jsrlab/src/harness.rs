//! Experiment orchestration: the benchmark registry with its external
//! reference values, seeded training campaigns with optional worker
//! fan-out, aggregate statistics, and the CSV/JSON report generators
//! behind the command-line interface.

use crate::bounds::{self, theory, ProductSearch};
use crate::error::{Error, Result};
use crate::matset::{benchmark_column_modes, benchmark_sigma2, benchmark_sigma8, MatrixSet};
use crate::neural::{self, NetworkParams, SampleSet, TrainConfig, TrainResult};
use crate::polytope;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::Path;

// ---------------------------------------------------------------------------
// Benchmark registry
// ---------------------------------------------------------------------------

/// Names accepted by [`benchmark`], for error messages and docs.
pub const BENCHMARK_NAMES: &str = "sigma2, sigma8, colmodes<n>";

/// Resolve a registry name to its matrix set. `sigma2` is the planar pair,
/// `sigma8` the 8-dimensional column-mode family, and `colmodes<n>` the
/// same construction at any dimension n >= 1.
pub fn benchmark(name: &str) -> Result<MatrixSet> {
    match name {
        "sigma2" => Ok(benchmark_sigma2()),
        "sigma8" => Ok(benchmark_sigma8()),
        _ => {
            if let Some(suffix) = name.strip_prefix("colmodes") {
                let n: usize = suffix.parse().map_err(|_| {
                    Error::Config(format!(
                        "unknown benchmark '{name}'; available: {BENCHMARK_NAMES}"
                    ))
                })?;
                return benchmark_column_modes(n);
            }
            Err(Error::Config(format!(
                "unknown benchmark '{name}'; available: {BENCHMARK_NAMES}"
            )))
        }
    }
}

/// Known external reference values for a benchmark. These are quoted
/// verbatim in reports, always labeled as references, never recomputed.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReferenceConstants {
    /// Known joint spectral radius.
    pub jsr: f64,
    /// Best ellipsoidal-norm upper bound.
    pub rho_q: f64,
    /// Degree-4 sum-of-squares upper bound.
    pub rho_sos4: f64,
}

/// Reference constants for a named benchmark, when available. The
/// column-mode family carries constants only at n = 8 (where it coincides
/// with `sigma8`).
pub fn reference_constants(name: &str) -> Option<ReferenceConstants> {
    match name {
        "sigma2" => Some(ReferenceConstants {
            jsr: 8.6881,
            rho_q: 9.5868,
            rho_sos4: 8.7203,
        }),
        "sigma8" | "colmodes8" => Some(ReferenceConstants {
            jsr: 1.0,
            rho_q: 2.4286,
            rho_sos4: 1.0006,
        }),
        _ => None,
    }
}

/// External reference row for a trained architecture on a benchmark:
/// best/mean/std of the empirical loss over 20 seeds with 500 samples.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrainingReference {
    pub layers: usize,
    pub width: usize,
    pub best: f64,
    pub mean: f64,
    pub std: f64,
}

const SIGMA2_TRAINING_REFERENCE: &[TrainingReference] = &[
    TrainingReference { layers: 1, width: 5, best: 8.6977, mean: 9.0251, std: 0.8800 },
    TrainingReference { layers: 1, width: 10, best: 8.6910, mean: 8.6969, std: 0.0056 },
    TrainingReference { layers: 2, width: 5, best: 8.6983, mean: 8.9312, std: 0.4645 },
    TrainingReference { layers: 2, width: 10, best: 8.6944, mean: 8.7049, std: 0.0077 },
    TrainingReference { layers: 3, width: 5, best: 8.6967, mean: 9.1984, std: 0.7293 },
    TrainingReference { layers: 3, width: 10, best: 8.6946, mean: 8.7130, std: 0.0175 },
];

/// Reference training row for (benchmark, layers, width), when published.
pub fn training_reference(name: &str, layers: usize, width: usize) -> Option<TrainingReference> {
    if name != "sigma2" {
        return None;
    }
    SIGMA2_TRAINING_REFERENCE
        .iter()
        .copied()
        .find(|r| r.layers == layers && r.width == width)
}

/// External reference values for the post-processing pipeline on the
/// planar benchmark: the empirical loss of a 2x10 network trained on 100
/// samples, and the certified bound of the polytope norm built from it.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PolytopeReference {
    pub empirical_loss_2x10: f64,
    pub certified_bound: f64,
}

pub fn polytope_reference(name: &str) -> Option<PolytopeReference> {
    match name {
        "sigma2" => Some(PolytopeReference {
            empirical_loss_2x10: 8.5788,
            certified_bound: 9.4157,
        }),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Training campaigns
// ---------------------------------------------------------------------------

/// Worker cap from the JSRLAB_WORKERS environment variable, if set to a
/// positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var("JSRLAB_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&w| w > 0)
}

/// Train `config.n_seeds` seeds starting at `seed_base`, fanning out to a
/// worker pool when `workers` allows. Each per-seed run is single-threaded
/// and bit-reproducible, so the assembled (seed-sorted) results do not
/// depend on the degree of parallelism.
pub fn run_training_campaign(
    set: &MatrixSet,
    config: &TrainConfig,
    seed_base: u64,
    workers: Option<usize>,
) -> Result<Vec<TrainResult>> {
    config.validate()?;
    let seeds: Vec<u64> = (0..config.n_seeds as u64).map(|i| seed_base + i).collect();
    let mut results = match workers {
        Some(1) => seeds
            .iter()
            .map(|&seed| neural::train(config, set, seed))
            .collect::<Result<Vec<_>>>()?,
        _ => {
            use rayon::prelude::*;
            let run = || {
                seeds
                    .par_iter()
                    .map(|&seed| neural::train(config, set, seed))
                    .collect::<Result<Vec<_>>>()
            };
            match workers {
                Some(w) => rayon::ThreadPoolBuilder::new()
                    .num_threads(w)
                    .build()
                    .map_err(|e| Error::Config(format!("worker pool: {e}")))?
                    .install(run)?,
                None => run()?,
            }
        }
    };
    results.sort_by_key(|r| r.seed);
    Ok(results)
}

/// Order statistics over a campaign: the minimum, mean, and sample
/// standard deviation of the per-seed best losses.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrainingAggregate {
    pub best: f64,
    pub mean: f64,
    pub std: f64,
}

pub fn aggregate_training(results: &[TrainResult]) -> Result<TrainingAggregate> {
    if results.is_empty() {
        return Err(Error::Domain("cannot aggregate an empty campaign".into()));
    }
    let losses: Vec<f64> = results.iter().map(|r| r.best_loss).collect();
    let best = losses.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = losses.iter().sum::<f64>() / losses.len() as f64;
    let std = if losses.len() < 2 {
        0.0
    } else {
        let var = losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>()
            / (losses.len() - 1) as f64;
        var.sqrt()
    };
    Ok(TrainingAggregate { best, mean, std })
}

// ---------------------------------------------------------------------------
// CSV generation
// ---------------------------------------------------------------------------

/// Full-precision CSV float: 17 significant digits, '.' separator.
pub fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Reproduce the layers-by-width training table on the planar benchmark:
/// one row per (layers, width) in {1,2,3} x {5,10} with computed and
/// reference statistics side by side. Cells whose campaign fails are kept
/// with empty computed columns and a `failed` status.
pub fn table1_repro(seeds: usize, samples: usize) -> Result<String> {
    table1_repro_detailed(seeds, samples, 0, None, workers_from_env())
}

pub fn table1_repro_detailed(
    seeds: usize,
    samples: usize,
    seed_base: u64,
    epochs: Option<usize>,
    workers: Option<usize>,
) -> Result<String> {
    if seeds < 2 {
        return Err(Error::Config("table needs at least 2 seeds".into()));
    }
    let set = benchmark_sigma2();
    let mut csv = String::from(
        "layers,width,best_computed,mean_computed,std_computed,\
         best_reference,mean_reference,std_reference,status\n",
    );
    for &(layers, width) in &[(1, 5), (1, 10), (2, 5), (2, 10), (3, 5), (3, 10)] {
        let config = TrainConfig {
            hidden_layers: layers,
            width,
            n_samples: samples,
            n_seeds: seeds,
            epochs: epochs.unwrap_or(TrainConfig::default().epochs),
            ..TrainConfig::default()
        };
        let reference = training_reference("sigma2", layers, width)
            .expect("all six table cells carry references");
        let cell = run_training_campaign(&set, &config, seed_base, workers)
            .and_then(|results| aggregate_training(&results));
        match cell {
            Ok(agg) => {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},ok\n",
                    layers,
                    width,
                    csv_float(agg.best),
                    csv_float(agg.mean),
                    csv_float(agg.std),
                    csv_float(reference.best),
                    csv_float(reference.mean),
                    csv_float(reference.std),
                ));
            }
            Err(_) => {
                csv.push_str(&format!(
                    "{},{},,,,{},{},{},failed\n",
                    layers,
                    width,
                    csv_float(reference.best),
                    csv_float(reference.mean),
                    csv_float(reference.std),
                ));
            }
        }
    }
    Ok(csv)
}

/// Per-seed loss traces plus a bucketed min/mean/max band over time.
#[derive(Debug, Clone)]
pub struct ConvergenceTrace {
    /// Columns: seed, time_seconds, loss, best_so_far.
    pub traces_csv: String,
    /// Columns: time_seconds, mean_best, min_best, max_best.
    pub bands_csv: String,
}

const BAND_BUCKETS: usize = 50;

/// Run one training per seed and emit its trace with a running minimum,
/// plus a per-time-bucket aggregate across seeds for band plots.
pub fn convergence_trace(
    set: &MatrixSet,
    config: &TrainConfig,
    seeds: &[u64],
    workers: Option<usize>,
) -> Result<ConvergenceTrace> {
    let mut traces_csv = String::from("seed,time_seconds,loss,best_so_far\n");
    let mut bands_csv = String::from("time_seconds,mean_best,min_best,max_best\n");
    if seeds.is_empty() {
        return Ok(ConvergenceTrace {
            traces_csv,
            bands_csv,
        });
    }
    config.validate()?;

    let results: Vec<TrainResult> = match workers {
        Some(1) => seeds
            .iter()
            .map(|&s| neural::train(config, set, s))
            .collect::<Result<Vec<_>>>()?,
        _ => {
            use rayon::prelude::*;
            let run = || {
                seeds
                    .par_iter()
                    .map(|&s| neural::train(config, set, s))
                    .collect::<Result<Vec<_>>>()
            };
            match workers {
                Some(w) => rayon::ThreadPoolBuilder::new()
                    .num_threads(w)
                    .build()
                    .map_err(|e| Error::Config(format!("worker pool: {e}")))?
                    .install(run)?,
                None => run()?,
            }
        }
    };

    let mut max_time = 0.0f64;
    for result in &results {
        let mut best = f64::INFINITY;
        for &(t, loss) in &result.trace {
            best = best.min(loss);
            traces_csv.push_str(&format!(
                "{},{},{},{}\n",
                result.seed,
                csv_float(t),
                csv_float(loss),
                csv_float(best)
            ));
            max_time = max_time.max(t);
        }
    }

    if max_time > 0.0 {
        for b in 0..BAND_BUCKETS {
            let cutoff = max_time * (b + 1) as f64 / BAND_BUCKETS as f64;
            let mut bests = Vec::new();
            for result in &results {
                let mut best = f64::INFINITY;
                for &(t, loss) in &result.trace {
                    if t <= cutoff {
                        best = best.min(loss);
                    }
                }
                if best.is_finite() {
                    bests.push(best);
                }
            }
            if bests.is_empty() {
                continue;
            }
            let mean = bests.iter().sum::<f64>() / bests.len() as f64;
            let min = bests.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = bests.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            bands_csv.push_str(&format!(
                "{},{},{},{}\n",
                csv_float(cutoff),
                csv_float(mean),
                csv_float(min),
                csv_float(max)
            ));
        }
    }

    Ok(ConvergenceTrace {
        traces_csv,
        bands_csv,
    })
}

// ---------------------------------------------------------------------------
// Experiment dispatch
// ---------------------------------------------------------------------------

/// Benchmark selector: a registry name or an inline matrix set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BenchmarkSpec {
    Name(String),
    Inline(MatrixSet),
}

impl BenchmarkSpec {
    pub fn resolve(&self) -> Result<MatrixSet> {
        match self {
            BenchmarkSpec::Name(name) => benchmark(name),
            BenchmarkSpec::Inline(set) => Ok(set.clone()),
        }
    }

    /// Registry name when named, a shape label otherwise.
    pub fn label(&self) -> String {
        match self {
            BenchmarkSpec::Name(name) => name.clone(),
            BenchmarkSpec::Inline(set) => {
                format!("inline(n={}, modes={})", set.dim(), set.len())
            }
        }
    }
}

/// Method selector plus its parameter block.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum MethodConfig {
    Neural {
        layers: usize,
        width: usize,
        samples: usize,
        seeds: usize,
        epochs: Option<usize>,
        l1: Option<f64>,
        /// Enables the staged sample schedule (20% start, +20% per fifth).
        incremental: Option<bool>,
        time_budget: Option<f64>,
    },
    Ellipsoid {
        restarts: Option<usize>,
        iters: Option<usize>,
    },
    Lower {
        max_length: usize,
        /// Enumeration cap; u64 here because this block travels through
        /// serde's flatten buffer, which cannot carry 128-bit integers.
        cap: Option<u64>,
        prune: Option<bool>,
    },
    Certify {
        network: String,
        samples: String,
        eps: Option<f64>,
    },
    Theory {
        n: u64,
        tau: Option<f64>,
        d: Option<u64>,
        k: Option<u64>,
    },
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::Neural { .. } => "neural",
            MethodConfig::Ellipsoid { .. } => "ellipsoid",
            MethodConfig::Lower { .. } => "lower",
            MethodConfig::Certify { .. } => "certify",
            MethodConfig::Theory { .. } => "theory",
        }
    }
}

/// A full experiment: benchmark, method block, and the base seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub benchmark: BenchmarkSpec,
    #[serde(flatten)]
    pub method: MethodConfig,
    #[serde(default)]
    pub seed_base: u64,
}

/// Report envelope: computed values and external references are kept in
/// separate blocks so no reference constant can masquerade as a result.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub benchmark: String,
    pub method: &'static str,
    pub seed_base: u64,
    pub computed: Value,
    pub reference: Value,
}

/// Dispatch an experiment to the right module and assemble its report.
pub fn run_experiment(config: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentReport> {
    let label = config.benchmark.label();
    // Validate the benchmark up front so even benchmark-independent
    // methods reject unknown registry names.
    let set = config.benchmark.resolve()?;
    let mut reference = json!({});
    if let BenchmarkSpec::Name(name) = &config.benchmark {
        if let Some(constants) = reference_constants(name) {
            reference = serde_json::to_value(constants)?;
        }
    }

    let computed = match &config.method {
        MethodConfig::Lower {
            max_length,
            cap,
            prune,
        } => {
            let opts = ProductSearch {
                cap: cap.map(u128::from).unwrap_or(ProductSearch::default().cap),
                prune: prune.unwrap_or(false),
            };
            let report = bounds::lower_bound_products_opts(&set, *max_length, opts)?;
            serde_json::to_value(report)?
        }
        MethodConfig::Ellipsoid { restarts, iters } => {
            let (report, norm) = bounds::ellipsoidal_upper_bound(
                &set,
                restarts.unwrap_or(10),
                iters.unwrap_or(800),
                config.seed_base,
            )?;
            json!({
                "bound": report,
                "factor_rows": norm.factor().rows(),
            })
        }
        MethodConfig::Neural {
            layers,
            width,
            samples,
            seeds,
            epochs,
            l1,
            incremental,
            time_budget,
        } => {
            let defaults = TrainConfig::default();
            let epochs = epochs.unwrap_or(defaults.epochs);
            let train_config = TrainConfig {
                hidden_layers: *layers,
                width: *width,
                n_samples: *samples,
                n_seeds: *seeds,
                epochs,
                l1_coeff: l1.unwrap_or(0.0),
                incremental: match incremental {
                    Some(true) => Some(TrainConfig::default_incremental_schedule(
                        *samples, epochs,
                    )),
                    _ => None,
                },
                time_budget: *time_budget,
                ..defaults
            };
            let results = run_training_campaign(&set, &train_config, config.seed_base, workers)?;
            let aggregate = aggregate_training(&results)?;
            if let BenchmarkSpec::Name(name) = &config.benchmark {
                if let Some(row) = training_reference(name, *layers, *width) {
                    reference["training"] = serde_json::to_value(row)?;
                }
            }
            let mut best = &results[0];
            for r in &results[1..] {
                if r.best_loss < best.best_loss {
                    best = r;
                }
            }
            let per_seed: Vec<Value> = results
                .iter()
                .map(|r| {
                    json!({
                        "seed": r.seed,
                        "best_loss": r.best_loss,
                        "trace": r.trace,
                        "events": r.events,
                    })
                })
                .collect();
            json!({
                "per_seed": per_seed,
                "aggregate": aggregate,
                "best_seed": best.seed,
                "best_network": best.best_params,
            })
        }
        MethodConfig::Certify {
            network,
            samples,
            eps,
        } => {
            let params = load_network(Path::new(network))?;
            let sample_set = load_samples(Path::new(samples))?;
            let report =
                run_certification(&config.benchmark, &params, &sample_set, eps.unwrap_or(1e-3))?;
            reference = report.reference;
            report.computed
        }
        MethodConfig::Theory { n, tau, d, k } => {
            let query = theory::TheoryQuery {
                n: *n,
                tau: *tau,
                d: *d,
                k: *k,
            };
            query.validate()?;
            theory_report(&query)?
        }
    };

    Ok(ExperimentReport {
        benchmark: label,
        method: config.method.name(),
        seed_base: config.seed_base,
        computed,
        reference,
    })
}

/// Build the polytope norm for a network over a sample set, certify the
/// resulting upper bound on the benchmark, and assemble the report.
pub fn run_certification(
    benchmark: &BenchmarkSpec,
    params: &NetworkParams,
    samples: &SampleSet,
    eps: f64,
) -> Result<ExperimentReport> {
    let set = benchmark.resolve()?;
    let mut reference = json!({});
    if let BenchmarkSpec::Name(name) = benchmark {
        if let Some(constants) = reference_constants(name) {
            reference = serde_json::to_value(constants)?;
        }
        if let Some(row) = polytope_reference(name) {
            reference["polytope"] = serde_json::to_value(row)?;
        }
    }
    let shim = TrainResult {
        seed: 0,
        best_loss: f64::NAN,
        best_params: params.clone(),
        trace: vec![],
        events: vec![],
    };
    let (norm, dropped) = polytope::build_polytope_norm_detailed(&shim, samples, eps)?;
    let report = polytope::certified_bound(&norm, &set)?;
    let computed = json!({
        "bound": report,
        "vertex_count": norm.vertex_count(),
        "dropped_samples": dropped,
    });
    Ok(ExperimentReport {
        benchmark: benchmark.label(),
        method: "certify",
        seed_base: 0,
        computed,
        reference,
    })
}

/// Assemble every calculator result applicable to the query. Big integers
/// are emitted as decimal strings to keep arbitrary precision in JSON.
pub fn theory_report(query: &theory::TheoryQuery) -> Result<Value> {
    let n = query.n;
    let mut out = json!({
        "n": n,
        "tau_quad": theory::tau_quad(n)?,
    });
    if let Some(d) = query.d {
        out["d"] = json!(d);
        out["tau_sos"] = json!(theory::tau_sos(n, d)?.to_string());
    }
    if let Some(k) = query.k {
        out["k"] = json!(k);
        out["barvinok_d"] = json!(theory::barvinok_d(n, k)?.to_string());
        if k > n {
            out["mcmullen_faces"] = json!(theory::mcmullen_faces(n, k)?.to_string());
        }
    }
    if let Some(tau) = query.tau {
        out["tau"] = json!(tau);
        match theory::barvinok_min_k(n, tau)? {
            Some(min_k) => {
                out["min_k"] = json!(min_k);
                let s = theory::network_structure_bound(n, tau)?;
                out["structure"] = json!({
                    "depth": s.depth,
                    "min_k": s.min_k,
                    "vertices": s.vertices.to_string(),
                    "faces": s.faces.to_string(),
                    "width_exponent": s.width_exponent,
                    "log10_width_bound": s.log10_width_bound,
                });
            }
            None => {
                out["min_k"] = Value::Null;
            }
        }
    }
    Ok(out)
}

/// CSV comparing certificate sizes: piecewise-linear coordinates vs the
/// SOS Gram parameter count at matched precision, one row per dimension.
/// The header comment records the Gram-count assumption behind `sos_vars`.
pub fn variables_comparison_csv(n_range: &[u64], d: u64) -> Result<String> {
    let rows = theory::variables_comparison(n_range, d)?;
    let mut csv = String::from(
        "# sos_vars counts the free entries g(g+1)/2 of a symmetric Gram \
         matrix with g = binomial(n+d-1, d)\n",
    );
    csv.push_str("n,tau,min_k,cpwl_vars,sos_vars\n");
    for row in rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.n,
            csv_float(row.tau),
            row.min_k,
            row.cpwl_vars,
            row.sos_vars
        ));
    }
    Ok(csv)
}

// ---------------------------------------------------------------------------
// File IO helpers
// ---------------------------------------------------------------------------

pub fn load_experiment_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_network(path: &Path) -> Result<NetworkParams> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_samples(path: &Path) -> Result<SampleSet> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_matrix_set(path: &Path) -> Result<MatrixSet> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_text(text: &str, path: &Path) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}
