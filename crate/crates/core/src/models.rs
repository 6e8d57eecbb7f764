//! Built-in regression models: ordinary least squares and gradient-boosted
//! stumps.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::metrics::baseline_r2;
use crate::shapley::{predict_all, Predictor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    intercept: f64,
    coefficients: Vec<f64>,
}

impl LinearModel {
    pub fn new(intercept: f64, coefficients: Vec<f64>) -> Result<Self> {
        if !intercept.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidValue("linear model parameters must be finite".into()));
        }
        if coefficients.is_empty() {
            return Err(Error::DegenerateInput("linear model needs at least one coefficient".into()));
        }
        Ok(Self { intercept, coefficients })
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }
}

impl Predictor for LinearModel {
    fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }
}

/// Least-squares fit with an intercept, solved by Householder QR.
///
/// A [`Error::SingularDesign`] from here names the offending feature index.
pub fn fit_ols(dataset: &Dataset) -> Result<LinearModel> {
    let (n, f) = (dataset.n_samples(), dataset.n_features());
    if n <= f {
        return Err(Error::DegenerateInput(format!(
            "OLS needs more rows than features (N = {n}, F = {f})"
        )));
    }
    let x = dataset.features();
    let design = Array2::from_shape_fn((n, f + 1), |(i, j)| if j == 0 { 1.0 } else { x[[i, j - 1]] });
    let beta = least_squares(design.view(), dataset.target()).map_err(|e| match e {
        Error::SingularDesign { column } => Error::SingularDesign { column: column.saturating_sub(1) },
        other => other,
    })?;
    LinearModel::new(beta[0], beta[1..].to_vec())
}

/// Depth-1 regression tree: `left_value` when `x[feature] <= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub left_value: f64,
    pub right_value: f64,
}

impl Stump {
    pub fn eval(&self, row: &[f64]) -> f64 {
        if row[self.feature] <= self.threshold {
            self.left_value
        } else {
            self.right_value
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EnsembleParts {
    n_features: usize,
    init_value: f64,
    learning_rate: f64,
    stumps: Vec<Stump>,
}

/// Summed stump contributions for one feature as a step function:
/// `values[k]` applies when exactly `k` thresholds lie below `x`.
#[derive(Debug, Clone, PartialEq)]
struct StepTable {
    thresholds: Vec<f64>,
    values: Vec<f64>,
}

impl StepTable {
    fn build(stumps: &[Stump], feature: usize) -> Self {
        let own: Vec<&Stump> = stumps.iter().filter(|s| s.feature == feature).collect();
        let mut thresholds: Vec<f64> = own.iter().map(|s| s.threshold).collect();
        thresholds.sort_by(f64::total_cmp);
        thresholds.dedup();
        let positions: Vec<usize> =
            own.iter().map(|s| thresholds.partition_point(|t| *t < s.threshold)).collect();
        let values = (0..=thresholds.len())
            .map(|k| {
                own.iter()
                    .zip(&positions)
                    .map(|(s, &pos)| if pos >= k { s.left_value } else { s.right_value })
                    .sum()
            })
            .collect();
        Self { thresholds, values }
    }

    fn eval(&self, x: f64) -> f64 {
        self.values[self.thresholds.partition_point(|t| *t < x)]
    }
}

/// Gradient-boosted stumps on squared error.
///
/// Prediction is `init_value + learning_rate · Σ stump(x)`. Stumps on the
/// same feature are merged into a step table at construction, so prediction
/// costs one binary search per feature regardless of ensemble size.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "EnsembleParts", into = "EnsembleParts")]
pub struct StumpEnsemble {
    parts: EnsembleParts,
    tables: Vec<StepTable>,
}

impl PartialEq for StumpEnsemble {
    fn eq(&self, other: &Self) -> bool {
        self.parts == other.parts
    }
}

impl TryFrom<EnsembleParts> for StumpEnsemble {
    type Error = Error;

    fn try_from(parts: EnsembleParts) -> Result<Self> {
        StumpEnsemble::new(parts.n_features, parts.init_value, parts.learning_rate, parts.stumps)
    }
}

impl From<StumpEnsemble> for EnsembleParts {
    fn from(e: StumpEnsemble) -> Self {
        e.parts
    }
}

impl StumpEnsemble {
    pub fn new(n_features: usize, init_value: f64, learning_rate: f64, stumps: Vec<Stump>) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::DegenerateInput("ensemble needs at least one feature".into()));
        }
        if !(learning_rate > 0.0 && learning_rate <= 1.0) {
            return Err(Error::InvalidConfig(format!("learning rate {learning_rate} is outside (0, 1]")));
        }
        if !init_value.is_finite() {
            return Err(Error::InvalidValue("initial value must be finite".into()));
        }
        for s in &stumps {
            if s.feature >= n_features {
                return Err(Error::InvalidValue(format!(
                    "stump splits on feature {} but the model has {n_features}",
                    s.feature
                )));
            }
            if ![s.threshold, s.left_value, s.right_value].iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidValue("stump parameters must be finite".into()));
            }
        }
        let tables = (0..n_features).map(|f| StepTable::build(&stumps, f)).collect();
        Ok(Self { parts: EnsembleParts { n_features, init_value, learning_rate, stumps }, tables })
    }

    pub fn init_value(&self) -> f64 {
        self.parts.init_value
    }

    pub fn learning_rate(&self) -> f64 {
        self.parts.learning_rate
    }

    pub fn stumps(&self) -> &[Stump] {
        &self.parts.stumps
    }

    pub fn iterations(&self) -> usize {
        self.parts.stumps.len()
    }

    /// The ensemble after its first `iterations` stumps.
    pub fn truncated(&self, iterations: usize) -> Self {
        let keep = iterations.min(self.parts.stumps.len());
        Self::new(
            self.parts.n_features,
            self.parts.init_value,
            self.parts.learning_rate,
            self.parts.stumps[..keep].to_vec(),
        )
        .expect("prefix of a valid ensemble is valid")
    }
}

impl Predictor for StumpEnsemble {
    fn n_features(&self) -> usize {
        self.parts.n_features
    }

    fn predict(&self, row: &[f64]) -> f64 {
        let total: f64 = self.tables.iter().zip(row).map(|(t, &x)| t.eval(x)).sum();
        self.parts.init_value + self.parts.learning_rate * total
    }
}

/// Either built-in model, for callers that pick one at run time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Linear(LinearModel),
    Stumps(StumpEnsemble),
}

impl Predictor for Model {
    fn n_features(&self) -> usize {
        match self {
            Model::Linear(m) => m.n_features(),
            Model::Stumps(m) => m.n_features(),
        }
    }

    fn predict(&self, row: &[f64]) -> f64 {
        match self {
            Model::Linear(m) => m.predict(row),
            Model::Stumps(m) => m.predict(row),
        }
    }
}

struct SplitCandidate {
    feature: usize,
    threshold: f64,
    gain: f64,
    left_value: f64,
    right_value: f64,
}

/// Best stump for `residuals`, maximizing `S_L²/n_L + S_R²/n_R` (equivalently
/// minimizing the post-split residual sum of squares). Candidates are
/// scanned by ascending feature and threshold and only a strictly better
/// gain replaces the incumbent.
fn best_split(x: &Array2<f64>, order: &[Vec<usize>], residuals: &[f64]) -> Option<SplitCandidate> {
    let n = residuals.len();
    let total: f64 = residuals.iter().sum();
    let mut best: Option<SplitCandidate> = None;
    for (feature, idx) in order.iter().enumerate() {
        let mut left_sum = 0.0;
        for k in 0..n - 1 {
            left_sum += residuals[idx[k]];
            let a = x[[idx[k], feature]];
            let b = x[[idx[k + 1], feature]];
            if a == b {
                continue;
            }
            let n_left = (k + 1) as f64;
            let n_right = (n - k - 1) as f64;
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / n_left + right_sum * right_sum / n_right;
            if best.as_ref().is_none_or(|c| gain > c.gain) {
                let mut threshold = a + (b - a) / 2.0;
                if threshold >= b {
                    threshold = a;
                }
                best = Some(SplitCandidate {
                    feature,
                    threshold,
                    gain,
                    left_value: left_sum / n_left,
                    right_value: right_sum / n_right,
                });
            }
        }
    }
    best
}

/// Fits `iterations` boosting rounds of depth-1 trees on squared error.
pub fn fit_stump_ensemble(dataset: &Dataset, iterations: usize, learning_rate: f64) -> Result<StumpEnsemble> {
    if iterations == 0 {
        return Err(Error::InvalidConfig("boosting needs at least one iteration".into()));
    }
    if !(learning_rate > 0.0 && learning_rate <= 1.0) {
        return Err(Error::InvalidConfig(format!("learning rate {learning_rate} is outside (0, 1]")));
    }
    let n = dataset.n_samples();
    if n < 2 {
        return Err(Error::DegenerateInput("boosting needs at least 2 rows".into()));
    }
    let x = dataset.features().to_owned();
    let y = dataset.target();
    let order: Vec<Vec<usize>> = (0..dataset.n_features())
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let init_value = y.iter().sum::<f64>() / n as f64;
    let mut pred = vec![init_value; n];
    let mut residuals = vec![0.0; n];
    let mut stumps = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        for i in 0..n {
            residuals[i] = y[i] - pred[i];
        }
        let split = best_split(&x, &order, &residuals).ok_or(Error::NoValidSplit)?;
        let stump = Stump {
            feature: split.feature,
            threshold: split.threshold,
            left_value: split.left_value,
            right_value: split.right_value,
        };
        for (i, p) in pred.iter_mut().enumerate() {
            *p += learning_rate * stump.eval(x.row(i).as_slice().expect("owned rows are contiguous"));
        }
        stumps.push(stump);
    }
    StumpEnsemble::new(dataset.n_features(), init_value, learning_rate, stumps)
}

/// Training R² (`var(ŷ) / (var(ŷ) + var(res))`) of `model` on `dataset`.
pub fn training_r2<P: Predictor + ?Sized>(model: &P, dataset: &Dataset) -> Result<f64> {
    let yhat = predict_all(model, dataset.features());
    baseline_r2(dataset.target(), &yhat)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetFit {
    pub model: StumpEnsemble,
    pub achieved_r2: f64,
}

/// Chooses the number of boosting rounds whose training R² is closest to
/// `target`, bisecting over the rounds of a single `max_iterations` fit.
///
/// Training R² grows with the number of rounds, so the prefix models of one
/// long fit trace the whole curve.
pub fn fit_to_target_r2(
    dataset: &Dataset,
    target: f64,
    learning_rate: f64,
    max_iterations: usize,
) -> Result<TargetFit> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidConfig(format!("target R² {target} is outside (0, 1)")));
    }
    let full = fit_stump_ensemble(dataset, max_iterations, learning_rate)?;
    let r2_at = |k: usize| training_r2(&full.truncated(k), dataset);

    let top = r2_at(max_iterations)?;
    if top < target {
        return Err(Error::TargetUnreachable { target, best: top, iterations: max_iterations });
    }
    // Invariant: r2(lo) < target <= r2(hi); zero rounds give R² = 0.
    let (mut lo, mut hi) = (0usize, max_iterations);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if r2_at(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let hi_r2 = r2_at(hi)?;
    let (k, achieved_r2) = if lo == 0 {
        (hi, hi_r2)
    } else {
        let lo_r2 = r2_at(lo)?;
        if target - lo_r2 < hi_r2 - target {
            (lo, lo_r2)
        } else {
            (hi, hi_r2)
        }
    };
    Ok(TargetFit { model: full.truncated(k), achieved_r2 })
}
