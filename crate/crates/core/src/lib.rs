//! De-biased estimation of co-heritability functionals in sparse
//! high-dimensional linear models.
//!
//! Two samples `y = Xβ + ε` and `w = Zγ + δ` share a marker set. The crate
//! estimates the inner product `⟨β, γ⟩`, the quadratic functionals `‖β‖²`
//! and `‖γ‖²`, and the normalized inner product
//! `⟨β, γ⟩ / (‖β‖‖γ‖)` by correcting scaled-Lasso plug-ins with projected
//! residual terms.

pub mod error;
pub mod functionals;
pub mod linalg;
pub mod projection;
pub mod rng;
pub mod sample;
pub mod simulation;
pub mod sqrt_lasso;

pub use error::{Error, Result};
pub use linalg::GramView;
pub use projection::{find_projection, solve_dual_penalized, DualOutcome, DualSettings, PathSettings, ProjectionDirection};
pub use rng::RngStream;
pub use sample::{sample_gaussian_ar1, standardize_columns, RegressionSample};
pub use sqrt_lasso::{fit_scaled_lasso, lasso_weighted_cd, ScaledLassoConfig, ScaledLassoFit};
pub use functionals::{
    debias_coefficients, estimate_inner_fde, estimate_quadratic_fde, estimate_ratio_fde, normalized_ratio,
    plugin_estimates, threshold_coefficients, CoheritabilityEstimate, FdeConfig, Method,
};
pub use simulation::{
    marginal_t_stats, preset, run_batch, run_experiment, ExperimentConfig, ExperimentReport, Pattern, TStats,
};
