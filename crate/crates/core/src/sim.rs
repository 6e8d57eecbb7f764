//! σ_unique under uniformly correlated Gaussian features.
//!
//! Each cell draws `n_samples` rows from a standard multivariate normal
//! whose off-diagonal correlations all equal `rho`, builds a linear outcome
//! with Gaussian noise, fits OLS, explains it and records σ_unique. Cells
//! whose correlation matrix is not positive definite are skipped.

use ndarray::{Array2, ArrayView2};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{decompose, DecomposeOptions};
use crate::models::fit_ols;
use crate::rng::{derive_seed, stream_rng};
use crate::shapley::{linear_shapley, predict_all, sampled_shapley, Background, SamplingConfig};

/// Smallest Cholesky pivot accepted as positive.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// `F × F` matrix with unit diagonal and `rho` everywhere else.
pub fn uniform_correlation(feature_count: usize, rho: f64) -> Array2<f64> {
    Array2::from_shape_fn((feature_count, feature_count), |(i, j)| if i == j { 1.0 } else { rho })
}

/// Lower-triangular `L` with `L·Lᵀ = corr`.
pub fn cholesky_factor(corr: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (n, m) = corr.dim();
    if n != m || n == 0 {
        return Err(Error::InvalidMatrix(format!("expected a non-empty square matrix, got {n}×{m}")));
    }
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (corr[[i, j]], corr[[j, i]]);
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::InvalidMatrix(format!("entry ({i}, {j}) is not finite")));
            }
            if (a - b).abs() > SYMMETRY_TOLERANCE {
                return Err(Error::InvalidMatrix(format!("not symmetric at ({i}, {j}): {a} vs {b}")));
            }
        }
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let pivot = corr[[j, j]] - (0..j).map(|k| l[[j, k]] * l[[j, k]]).sum::<f64>();
        if pivot.is_nan() || pivot <= PIVOT_TOLERANCE {
            return Err(Error::NonPositiveDefinite { index: j, pivot });
        }
        let d = pivot.sqrt();
        l[[j, j]] = d;
        for i in j + 1..n {
            let s = corr[[i, j]] - (0..j).map(|k| l[[i, k]] * l[[j, k]]).sum::<f64>();
            l[[i, j]] = s / d;
        }
    }
    Ok(l)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformCorrelationSpec {
    pub feature_count: usize,
    pub rho: f64,
    pub n_samples: usize,
    pub coefficients: Vec<f64>,
    pub noise_sd: f64,
    pub seed: u64,
}

impl UniformCorrelationSpec {
    fn validate(&self) -> Result<()> {
        if self.feature_count == 0 {
            return Err(Error::InvalidConfig("feature_count must be at least 1".into()));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::InvalidConfig(format!("rho {} is outside (-1, 1)", self.rho)));
        }
        if self.coefficients.len() != self.feature_count {
            return Err(Error::InvalidConfig(format!(
                "{} coefficients for {} features",
                self.coefficients.len(),
                self.feature_count
            )));
        }
        if self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig("coefficients must be finite".into()));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise_sd {} must be finite and >= 0", self.noise_sd)));
        }
        if self.n_samples <= self.feature_count + 1 {
            return Err(Error::InvalidConfig(format!(
                "n_samples {} is too small for {} features",
                self.n_samples, self.feature_count
            )));
        }
        Ok(())
    }
}

// Stream ids within a cell's seed.
const FEATURE_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;
const SHAPLEY_SEED_TAG: u64 = 2;

/// `n_samples × F` draws with standard normal marginals and uniform
/// correlation `rho`.
pub fn sample_mvn(spec: &UniformCorrelationSpec) -> Result<Array2<f64>> {
    spec.validate()?;
    let l = cholesky_factor(uniform_correlation(spec.feature_count, spec.rho).view())?;
    let mut rng = stream_rng(spec.seed, FEATURE_STREAM);
    let z = Array2::from_shape_simple_fn((spec.n_samples, spec.feature_count), || {
        StandardNormal.sample(&mut rng)
    });
    Ok(z.dot(&l.t()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ShapleyEstimator {
    /// Closed form for the fitted linear model.
    Linear,
    /// Permutation sampling against a seeded background subsample.
    Sampled { permutations: usize, background_subsample: Option<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Completed,
    SkippedNonPd,
    /// Fitting or decomposition failed; see the cell's message.
    Failed,
}

impl CellStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellStatus::Completed => "completed",
            CellStatus::SkippedNonPd => "skipped_non_pd",
            CellStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationCell {
    pub spec: UniformCorrelationSpec,
    pub status: CellStatus,
    /// Clamped to `[0, 1]`.
    pub sigma_unique: Option<f64>,
    pub sigma_unique_raw: Option<f64>,
    pub baseline_r2: Option<f64>,
    pub message: Option<String>,
}

impl SimulationCell {
    fn not_run(spec: &UniformCorrelationSpec, status: CellStatus, message: String) -> Self {
        Self {
            spec: spec.clone(),
            status,
            sigma_unique: None,
            sigma_unique_raw: None,
            baseline_r2: None,
            message: Some(message),
        }
    }
}

fn simulate(spec: &UniformCorrelationSpec, estimator: ShapleyEstimator) -> Result<SimulationCell> {
    let x = sample_mvn(spec)?;
    let mut noise_rng = stream_rng(spec.seed, NOISE_STREAM);
    let y: Vec<f64> = x
        .rows()
        .into_iter()
        .map(|row| {
            let eps: f64 = StandardNormal.sample(&mut noise_rng);
            row.iter().zip(&spec.coefficients).map(|(a, b)| a * b).sum::<f64>() + spec.noise_sd * eps
        })
        .collect();
    let dataset = Dataset::unnamed(x, y)?;
    let model = fit_ols(&dataset)?;
    let yhat = predict_all(&model, dataset.features());
    let background = Background::new(dataset.features().to_owned())?;
    let phi = match estimator {
        ShapleyEstimator::Linear => linear_shapley(&model, dataset.features(), &background)?,
        ShapleyEstimator::Sampled { permutations, background_subsample } => {
            let config = SamplingConfig {
                permutations,
                seed: derive_seed(spec.seed, &[SHAPLEY_SEED_TAG]),
                background_subsample,
            };
            sampled_shapley(&model, dataset.features(), &background, &config)?
        }
    };
    let d = decompose(dataset.target(), &yhat, &phi, DecomposeOptions::default())?;
    let sigma = d.sigma_unique.ok_or(Error::ModelExplainsNothing(0.0))?;
    Ok(SimulationCell {
        spec: spec.clone(),
        status: CellStatus::Completed,
        sigma_unique: Some(sigma.clamped),
        sigma_unique_raw: Some(sigma.raw),
        baseline_r2: Some(d.baseline_r2),
        message: None,
    })
}

/// Runs one cell. Never fails: problems are recorded in the cell status.
pub fn run_cell(spec: &UniformCorrelationSpec, estimator: ShapleyEstimator) -> SimulationCell {
    match simulate(spec, estimator) {
        Ok(cell) => cell,
        Err(e @ Error::NonPositiveDefinite { .. }) => {
            SimulationCell::not_run(spec, CellStatus::SkippedNonPd, e.to_string())
        }
        Err(e) => SimulationCell::not_run(spec, CellStatus::Failed, e.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub feature_count: usize,
    pub rho_values: Vec<f64>,
    pub coefficient_configs: Vec<Vec<f64>>,
    pub n_samples: usize,
    /// `None` picks `sqrt(Σ β²)` per config, for a population R² of 0.5 at
    /// `rho = 0`.
    pub noise_sd: Option<f64>,
    pub master_seed: u64,
    pub estimator: ShapleyEstimator,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            feature_count: 3,
            rho_values: (0..9).map(|k| (k as f64 - 4.0) / 5.0).collect(),
            coefficient_configs: vec![vec![1.0, 1.0, 1.0], vec![4.0, 1.0, 1.0], vec![1.0, 1.0, 0.0]],
            n_samples: 2000,
            noise_sd: None,
            master_seed: 20200701,
            estimator: ShapleyEstimator::Linear,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rho_values.is_empty() || self.coefficient_configs.is_empty() {
            return Err(Error::InvalidConfig("grid needs at least one rho and one coefficient config".into()));
        }
        if let Some(sd) = self.noise_sd {
            if !(sd >= 0.0 && sd.is_finite()) {
                return Err(Error::InvalidConfig(format!("noise_sd {sd} must be finite and >= 0")));
            }
        }
        if let ShapleyEstimator::Sampled { permutations: 0, .. } = self.estimator {
            return Err(Error::InvalidConfig("sampled estimator needs at least one permutation".into()));
        }
        for config in 0..self.coefficient_configs.len() {
            for rho in 0..self.rho_values.len() {
                self.cell_spec(config, rho).validate()?;
            }
        }
        Ok(())
    }

    /// Spec of the cell at (`config`, `rho`) index coordinates.
    pub fn cell_spec(&self, config: usize, rho: usize) -> UniformCorrelationSpec {
        let coefficients = self.coefficient_configs[config].clone();
        let noise_sd = self
            .noise_sd
            .unwrap_or_else(|| coefficients.iter().map(|c| c * c).sum::<f64>().sqrt());
        UniformCorrelationSpec {
            feature_count: self.feature_count,
            rho: self.rho_values[rho],
            n_samples: self.n_samples,
            coefficients,
            noise_sd,
            seed: derive_seed(self.master_seed, &[config as u64, rho as u64]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationGrid {
    pub rho_values: Vec<f64>,
    pub coefficient_configs: Vec<Vec<f64>>,
    /// `cells[config][rho]`.
    pub cells: Vec<Vec<SimulationCell>>,
}

/// Evaluates every (config, rho) cell in parallel.
pub fn run_grid(spec: &GridSpec) -> Result<SimulationGrid> {
    spec.validate()?;
    let n_rho = spec.rho_values.len();
    let coords: Vec<(usize, usize)> = (0..spec.coefficient_configs.len())
        .flat_map(|c| (0..n_rho).map(move |r| (c, r)))
        .collect();
    let flat: Vec<SimulationCell> = coords
        .par_iter()
        .map(|&(c, r)| run_cell(&spec.cell_spec(c, r), spec.estimator))
        .collect();
    let cells = flat.chunks(n_rho).map(|row| row.to_vec()).collect();
    Ok(SimulationGrid {
        rho_values: spec.rho_values.clone(),
        coefficient_configs: spec.coefficient_configs.clone(),
        cells,
    })
}

/// Per-config summary of how σ_unique moves with rho.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowTrend {
    pub config_id: usize,
    pub coefficients: Vec<f64>,
    pub completed: usize,
    pub skipped_non_pd: usize,
    pub failed: usize,
    /// σ_unique at the smallest and largest completed rho.
    pub sigma_at_min_rho: Option<f64>,
    pub sigma_at_max_rho: Option<f64>,
    /// Steps along increasing rho where σ_unique went up.
    pub increases: usize,
}

impl SimulationGrid {
    pub fn trends(&self) -> Vec<RowTrend> {
        self.cells
            .iter()
            .enumerate()
            .map(|(config_id, row)| {
                let count = |s: CellStatus| row.iter().filter(|c| c.status == s).count();
                let mut sigmas: Vec<(f64, f64)> = row
                    .iter()
                    .filter_map(|c| c.sigma_unique.map(|s| (c.spec.rho, s)))
                    .collect();
                sigmas.sort_by(|a, b| a.0.total_cmp(&b.0));
                RowTrend {
                    config_id,
                    coefficients: self.coefficient_configs[config_id].clone(),
                    completed: count(CellStatus::Completed),
                    skipped_non_pd: count(CellStatus::SkippedNonPd),
                    failed: count(CellStatus::Failed),
                    sigma_at_min_rho: sigmas.first().map(|s| s.1),
                    sigma_at_max_rho: sigmas.last().map(|s| s.1),
                    increases: sigmas.windows(2).filter(|w| w[1].1 > w[0].1).count(),
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_factor() {
        let l = cholesky_factor(Array2::eye(4).view()).unwrap();
        assert_eq!(l, Array2::<f64>::eye(4));
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        let err = cholesky_factor(uniform_correlation(3, -0.6).view()).unwrap_err();
        assert!(matches!(err, Error::NonPositiveDefinite { index: 2, .. }));
        let mut m = uniform_correlation(3, 0.2);
        m[[0, 2]] = 0.3;
        assert!(matches!(cholesky_factor(m.view()), Err(Error::InvalidMatrix(_))));
    }

    #[test]
    fn factor_round_trips() {
        let corr = uniform_correlation(3, 0.5);
        let l = cholesky_factor(corr.view()).unwrap();
        let back = l.dot(&l.t());
        for (a, b) in back.iter().zip(corr.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
        for i in 0..3 {
            for j in i + 1..3 {
                assert_eq!(l[[i, j]], 0.0);
            }
        }
    }

    #[test]
    fn skipped_cell_for_indefinite_rho() {
        let spec = UniformCorrelationSpec {
            feature_count: 3,
            rho: -0.6,
            n_samples: 100,
            coefficients: vec![1.0; 3],
            noise_sd: 1.0,
            seed: 1,
        };
        let cell = run_cell(&spec, ShapleyEstimator::Linear);
        assert_eq!(cell.status, CellStatus::SkippedNonPd);
        assert!(cell.sigma_unique.is_none());
    }

    #[test]
    fn default_rho_grid() {
        let g = GridSpec::default();
        assert_eq!(g.rho_values.len(), 9);
        assert_eq!(g.rho_values[0], -0.8);
        assert_eq!(g.rho_values[4], 0.0);
        assert_eq!(g.rho_values[8], 0.8);
    }

    #[test]
    fn rejects_bad_grid() {
        let g = GridSpec { rho_values: vec![1.2], ..GridSpec::default() };
        assert!(matches!(run_grid(&g), Err(Error::InvalidConfig(_))));
        let g = GridSpec { coefficient_configs: vec![vec![1.0, 2.0]], ..GridSpec::default() };
        assert!(matches!(run_grid(&g), Err(Error::InvalidConfig(_))));
    }
}
