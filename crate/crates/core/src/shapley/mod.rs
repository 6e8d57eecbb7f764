//! Shapley attributions for black-box predictors.
//!
//! The value of a coalition `S` for an instance `x` is the interventional
//! expectation `v(S) = mean_b f(x_S, b_{¬S})` over a background set. Three
//! estimators share it:
//!
//! - [`exact_shapley`] enumerates all `2^F` coalitions per instance.
//! - [`sampled_shapley`] averages telescoping marginal contributions over
//!   random feature orderings.
//! - [`linear_shapley`] uses the closed form for linear predictors.
//!
//! Work is spread across instances with rayon. Each instance draws from its
//! own seeded stream, so results do not depend on the thread count.

mod matrix;

use ndarray::{Array2, ArrayView2};
use rand::seq::index;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ensure_finite_matrix;
use crate::error::{Error, Result};
use crate::models::LinearModel;
use crate::rng::{stream_rng, BACKGROUND_STREAM};

pub use matrix::{Provenance, ShapleyMatrix};

/// Largest feature count [`exact_shapley`] accepts by default.
pub const EXACT_FEATURE_CAP: usize = 16;

/// Deterministic model evaluation on one feature row.
pub trait Predictor: Sync {
    fn n_features(&self) -> usize;
    fn predict(&self, row: &[f64]) -> f64;
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }

    fn predict(&self, row: &[f64]) -> f64 {
        (**self).predict(row)
    }
}

/// Wraps a closure as a [`Predictor`].
pub struct FnPredictor<F> {
    n_features: usize,
    f: F,
}

impl<F> FnPredictor<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(n_features: usize, f: F) -> Self {
        Self { n_features, f }
    }
}

impl<F> Predictor for FnPredictor<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, row: &[f64]) -> f64 {
        (self.f)(row)
    }
}

/// Predictions for every row of `x`.
pub fn predict_all<P: Predictor + ?Sized>(predictor: &P, x: ArrayView2<'_, f64>) -> Vec<f64> {
    x.rows()
        .into_iter()
        .map(|row| match row.as_slice() {
            Some(s) => predictor.predict(s),
            None => predictor.predict(&row.to_vec()),
        })
        .collect()
}

/// Reference rows used to fill in features outside a coalition.
#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    rows: Array2<f64>,
}

impl Background {
    pub fn new(rows: Array2<f64>) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(Error::DegenerateInput("background set is empty".into()));
        }
        ensure_finite_matrix("background", rows.view())?;
        Ok(Self { rows: rows.as_standard_layout().into_owned() })
    }

    pub fn rows(&self) -> ArrayView2<'_, f64> {
        self.rows.view()
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn n_features(&self) -> usize {
        self.rows.ncols()
    }

    /// `size` rows drawn without replacement, kept in their original order.
    /// Returns a clone when `size` covers the whole set.
    pub fn subsample(&self, size: usize, seed: u64) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidConfig("background subsample size must be at least 1".into()));
        }
        if size >= self.len() {
            return Ok(self.clone());
        }
        let mut rng = stream_rng(seed, BACKGROUND_STREAM);
        let mut picked = index::sample(&mut rng, self.len(), size).into_vec();
        picked.sort_unstable();
        Ok(Self { rows: self.rows.select(ndarray::Axis(0), &picked) })
    }

    /// Column means.
    pub fn means(&self) -> Vec<f64> {
        let b = self.len() as f64;
        self.rows.columns().into_iter().map(|c| c.sum() / b).collect()
    }

    /// Mean prediction over the background, i.e. `v(∅)`.
    pub fn mean_prediction<P: Predictor + ?Sized>(&self, predictor: &P) -> f64 {
        let b = self.len() as f64;
        predict_all(predictor, self.rows()).iter().sum::<f64>() / b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub permutations: usize,
    pub seed: u64,
    /// Number of background rows to keep, drawn with `seed`.
    pub background_subsample: Option<usize>,
}

impl SamplingConfig {
    pub fn new(permutations: usize, seed: u64) -> Self {
        Self { permutations, seed, background_subsample: None }
    }
}

fn check_inputs<P: Predictor + ?Sized>(
    predictor: &P,
    x: ArrayView2<'_, f64>,
    background: &Background,
) -> Result<usize> {
    let f = predictor.n_features();
    if f == 0 {
        return Err(Error::DegenerateInput("predictor has no features".into()));
    }
    if x.ncols() != f {
        return Err(Error::Shape(format!("instances have {} columns, predictor expects {f}", x.ncols())));
    }
    if background.n_features() != f {
        return Err(Error::Shape(format!(
            "background has {} columns, predictor expects {f}",
            background.n_features()
        )));
    }
    ensure_finite_matrix("instances", x)?;
    Ok(f)
}

/// `v(S)` for one instance: the mean prediction over background rows with
/// the features in `coalition` replaced by `x`'s values.
pub fn coalition_value<P: Predictor + ?Sized>(
    predictor: &P,
    x: &[f64],
    coalition: &[usize],
    background: &Background,
) -> Result<f64> {
    let f = predictor.n_features();
    if x.len() != f || background.n_features() != f {
        return Err(Error::Shape(format!(
            "instance has {} values, background {} columns, predictor expects {f}",
            x.len(),
            background.n_features()
        )));
    }
    if let Some(&bad) = coalition.iter().find(|&&j| j >= f) {
        return Err(Error::InvalidConfig(format!("coalition member {bad} is not a feature index (F = {f})")));
    }
    if coalition.len() == f && (0..f).all(|j| coalition.contains(&j)) {
        return Ok(predictor.predict(x));
    }
    let mut z = vec![0.0; f];
    let mut total = 0.0;
    for b in background.rows().rows() {
        for (j, zj) in z.iter_mut().enumerate() {
            *zj = b[j];
        }
        for &j in coalition {
            z[j] = x[j];
        }
        total += predictor.predict(&z);
    }
    Ok(total / background.len() as f64)
}

/// `|S|! (F − |S| − 1)! / F!` indexed by `|S|`.
fn shapley_weights(f: usize) -> Vec<f64> {
    let fact: Vec<f64> = (0..=f).scan(1.0, |acc, k| {
        if k > 0 {
            *acc *= k as f64;
        }
        Some(*acc)
    })
    .collect();
    (0..f).map(|s| fact[s] * fact[f - s - 1] / fact[f]).collect()
}

/// Exact Shapley values by enumerating every coalition, capped at
/// [`EXACT_FEATURE_CAP`] features.
pub fn exact_shapley<P: Predictor + ?Sized>(
    predictor: &P,
    x: ArrayView2<'_, f64>,
    background: &Background,
) -> Result<ShapleyMatrix> {
    exact_shapley_capped(predictor, x, background, EXACT_FEATURE_CAP)
}

pub fn exact_shapley_capped<P: Predictor + ?Sized>(
    predictor: &P,
    x: ArrayView2<'_, f64>,
    background: &Background,
    cap: usize,
) -> Result<ShapleyMatrix> {
    let f = check_inputs(predictor, x, background)?;
    if f > cap || f >= usize::BITS as usize {
        return Err(Error::FeatureCountExceeded { features: f, cap });
    }
    let n_masks = 1usize << f;
    let weights = shapley_weights(f);
    let bg = background.rows();
    let b_len = background.len() as f64;

    let rows: Vec<Vec<f64>> = (0..x.nrows())
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i).to_vec();
            // Each coalition is evaluated once and shared by all F sums.
            let mut values = vec![0.0; n_masks];
            let mut z = vec![0.0; f];
            for b in bg.rows() {
                for (mask, acc) in values.iter_mut().enumerate() {
                    for j in 0..f {
                        z[j] = if mask >> j & 1 == 1 { xi[j] } else { b[j] };
                    }
                    *acc += predictor.predict(&z);
                }
            }
            // The full coalition is averaged like every other one (rather
            // than taken as f(x)) so a feature the predictor ignores gets
            // bit-identical coalition values and an exactly zero column.
            for v in values.iter_mut() {
                *v /= b_len;
            }

            (0..f)
                .map(|j| {
                    let bit = 1usize << j;
                    (0..n_masks)
                        .filter(|mask| mask & bit == 0)
                        .map(|mask| weights[mask.count_ones() as usize] * (values[mask | bit] - values[mask]))
                        .sum()
                })
                .collect()
        })
        .collect();

    let phi0 = background.mean_prediction(predictor);
    let phi = Array2::from_shape_fn((x.nrows(), f), |(i, j)| rows[i][j]);
    ShapleyMatrix::new(phi, phi0, crate::data::default_feature_names(f), Provenance::Exact)
}

/// Monte Carlo Shapley values from random feature orderings.
///
/// For every instance and ordering the marginal contributions telescope
/// from `v(∅)` to `f(x)`, so each row satisfies additivity up to rounding.
/// Instance `i` draws its orderings from stream `i` under `config.seed`.
pub fn sampled_shapley<P: Predictor + ?Sized>(
    predictor: &P,
    x: ArrayView2<'_, f64>,
    background: &Background,
    config: &SamplingConfig,
) -> Result<ShapleyMatrix> {
    let f = check_inputs(predictor, x, background)?;
    if config.permutations == 0 {
        return Err(Error::InvalidConfig("at least one permutation is required".into()));
    }
    let background = match config.background_subsample {
        Some(k) => background.subsample(k, config.seed)?,
        None => background.clone(),
    };
    let phi0 = background.mean_prediction(predictor);
    let bg = background.rows();
    let b = background.len();
    let m = config.permutations;

    let rows: Vec<Vec<f64>> = (0..x.nrows())
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(config.seed, i as u64);
            let xi = x.row(i).to_vec();
            let fx = predictor.predict(&xi);
            let mut acc = vec![0.0; f];
            let mut order: Vec<usize> = (0..f).collect();
            let mut z = bg.to_owned();
            for _ in 0..m {
                order.shuffle(&mut rng);
                z.assign(&bg);
                let mut prev = phi0;
                for (k, &j) in order.iter().enumerate() {
                    let cur = if k + 1 == f {
                        fx
                    } else {
                        z.column_mut(j).fill(xi[j]);
                        predict_all(predictor, z.view()).iter().sum::<f64>() / b as f64
                    };
                    acc[j] += cur - prev;
                    prev = cur;
                }
            }
            acc.iter().map(|a| a / m as f64).collect()
        })
        .collect();

    let phi = Array2::from_shape_fn((x.nrows(), f), |(i, j)| rows[i][j]);
    ShapleyMatrix::new(
        phi,
        phi0,
        crate::data::default_feature_names(f),
        Provenance::Sampled { permutations: m, seed: config.seed },
    )
}

/// Closed-form Shapley values of a linear model:
/// `φᵢ^(f) = β_f (x_if − mean_B x_f)` and `φ₀ = β₀ + Σ β_f mean_B x_f`.
pub fn linear_shapley(
    model: &LinearModel,
    x: ArrayView2<'_, f64>,
    background: &Background,
) -> Result<ShapleyMatrix> {
    let f = check_inputs(model, x, background)?;
    let means = background.means();
    let beta = model.coefficients();
    let phi0 = model.intercept() + beta.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
    let phi = Array2::from_shape_fn((x.nrows(), f), |(i, j)| beta[j] * (x[[i, j]] - means[j]));
    ShapleyMatrix::new(phi, phi0, crate::data::default_feature_names(f), Provenance::ClosedFormLinear)
}
