//! Bayesian ordinal quantile regression.
//!
//! The model links ordinal responses `y_i ∈ {1..C}` to latent continuous
//! responses `z_i = x_i'β + ε_i` through a cutpoint vector `δ`, with
//! asymmetric-Laplace residuals whose skew selects the target quantile.
//! Inference runs a partially collapsed Gibbs sampler: the scale update
//! integrates out the latent mixture weights, the remaining blocks are
//! conditionally conjugate.
//!
//! The model has no intercept and is only identified up to scale, so the
//! reported estimates are the ratios `β / δ_{C-1}` of posterior means.
//!
//! Modules:
//! - [`distributions`]: densities and samplers the model needs.
//! - [`model`]: datasets, hyperparameters, and chain configuration.
//! - [`sampler`]: the Gibbs steps, chain driver, and posterior summaries.
//! - [`simulation`]: generators for the benchmark simulation families.
//! - [`evaluation`]: bootstrap intervals, RMSE scoring, the continuous
//!   quantile regression baseline, and the experiment runner.

pub mod distributions;
pub mod error;
pub mod evaluation;
pub(crate) mod linalg;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod simulation;
pub mod stats;

pub use error::{DataError, Error, Result};
