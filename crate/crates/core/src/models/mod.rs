//! Exact and sparse GP regression, hyperparameter search and scoring.
//!
//! The prior mean is zero throughout. Returned variances are latent; add the
//! noise variance for the observation variance.

mod exact;
mod inducing;
mod metrics;
mod optimize;
mod sparse;

pub use exact::{
    default_ski_grid, gp_fit, gp_fit_with, gp_predict, log_marginal_likelihood, optimize_exact, ExactState, FitConfig,
    Strategy,
};
pub use inducing::{farthest_point_sampling, fps_call_count};
pub use metrics::{metrics, Metrics};
pub use optimize::{optimize_hyperparams, pack_params, unpack_params, OptimizeResult, OptimizerConfig};
pub use sparse::{sparse_fit, sparse_fit_fixed, sparse_predict, vfe_objective, SparseFitInfo, SparseState, VfeTerms};
