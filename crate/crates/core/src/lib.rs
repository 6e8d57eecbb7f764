//! Shapley-value decomposition of R².
//!
//! Given observed outcomes, model predictions and per-instance Shapley
//! attributions, [`metrics::decompose`] splits the model's R² into
//! non-negative per-feature shares that sum back to the overall value, and
//! reports σ_unique, the fraction of model-explained variance that can be
//! assigned to individual features at all.
//!
//! The crate also carries everything needed to run the pipeline end to end
//! without an external ML stack:
//!
//! - [`shapley`]: exact, permutation-sampled and closed-form linear Shapley
//!   values for any [`shapley::Predictor`] under an interventional value
//!   function.
//! - [`models`]: ordinary least squares and gradient-boosted stumps.
//! - [`sim`]: the uniform-correlation simulation that shows how σ_unique
//!   falls as features become correlated.

pub mod data;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod shapley;
pub mod sim;

pub use data::Dataset;
pub use error::{Error, Result};
pub use metrics::{decompose, DecomposeOptions, Outcome, R2Decomposition, SigmaForm};
pub use shapley::{Background, Predictor, Provenance, SamplingConfig, ShapleyMatrix};
