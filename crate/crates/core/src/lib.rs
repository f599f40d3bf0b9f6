//! Maximum-likelihood fitting of directed bi-degree random graph models.

pub mod error;
pub mod family;
pub mod fisher;
pub mod inference;
pub mod model;
pub mod normal;
pub mod registry;
pub mod sampler;
pub mod simharness;
pub mod solver;

pub use error::{Error, Result};
pub use family::{families, EdgeFamily, Orientation, WeightFamily};
pub use fisher::{approx_error, dense_inverse, fisher_info, s_apply, ApproxError, SApprox, StructuredFisher};
pub use model::{bi_degrees, edge_mean, edge_variance, expected_degrees, log_likelihood, moment_residual, BiDegree, Graph, ParamVector};
pub use sampler::{design_params, replication_seed, sample_graph, LRule, SimDesign};
pub use solver::{default_start, existence_check, fit, newton_diagnostics, newton_fit, Existence, Feasibility, FitConfig, FitResult, NewtonDiagnostics};
pub use inference::{ci_for_contrast, contrast_interval, contrast_stat, plug_in_variances, AsymptoticCov, ContrastKind, Interval};
pub use normal::normal_quantile;
pub use simharness::{qq_export, run_experiment, ExperimentConfig, ExperimentRow};
