//! jsrlab: joint spectral radius estimation for finite matrix sets.
//!
//! The library computes lower bounds from finite matrix products, upper
//! bounds from ellipsoidal norms and from certified polytope norms built
//! out of trained homogeneous ReLU Lyapunov candidates, and closed-form
//! complexity figures comparing piecewise-linear and sum-of-squares
//! certificate sizes.

pub mod bounds;
pub mod error;
pub mod harness;
pub mod matset;
pub mod neural;
pub mod polytope;

pub use bounds::{
    ellipsoidal_upper_bound, lower_bound_products, BoundKind, BoundReport, EllipsoidalNorm,
};
pub use error::{Error, Result};
pub use harness::{
    benchmark, convergence_trace, run_experiment, run_training_campaign, table1_repro,
    BenchmarkSpec, ExperimentConfig, ExperimentReport, MethodConfig, ReferenceConstants,
};
pub use neural::{
    loss, project_output_nonneg, sample_sphere, train, NetworkParams, SampleSet, TrainConfig,
    TrainResult,
};
pub use polytope::{
    build_polytope_norm, certified_bound, gauge, interior_check, solve_lp, GaugeLPProblem,
    PolytopeNorm,
};
pub use matset::{
    benchmark_column_modes, benchmark_sigma2, benchmark_sigma8, Matrix, MatrixSet, SwitchingWord,
};
