//! R² decomposition over predictions and Shapley attributions.
//!
//! All variances are sample variances (N − 1 denominator) taken around each
//! vector's own mean; residuals are not assumed to be centered.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::ensure_finite;
use crate::error::{Error, Result};
use crate::shapley::ShapleyMatrix;

/// Unbiased sample variance, two-pass.
pub fn sample_variance(v: &[f64]) -> Result<f64> {
    if v.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "variance needs at least 2 values, got {}",
            v.len()
        )));
    }
    ensure_finite("vector", v)?;
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    Ok(ss / (n - 1.0))
}

fn check_pair(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::Shape(format!(
            "outcome has {} entries but predictions have {}",
            y.len(),
            yhat.len()
        )));
    }
    if y.len() < 2 {
        return Err(Error::DegenerateInput(format!("need at least 2 instances, got {}", y.len())));
    }
    ensure_finite("y", y)?;
    ensure_finite("yhat", yhat)
}

fn residual_variance(y: &[f64], yhat: impl Iterator<Item = f64>) -> Result<f64> {
    let res: Vec<f64> = y.iter().zip(yhat).map(|(a, b)| a - b).collect();
    sample_variance(&res)
}

fn outcome_variance(y: &[f64]) -> Result<f64> {
    let var_y = sample_variance(y)?;
    if var_y <= 0.0 {
        return Err(Error::DegenerateInput("outcome has zero variance".into()));
    }
    Ok(var_y)
}

/// `var(ŷ) / var(y)`. Not bounded above: overfit or rescaled predictions can
/// exceed 1.
pub fn classical_r2(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let var_y = outcome_variance(y)?;
    Ok(sample_variance(yhat)? / var_y)
}

/// `var(ŷ) / (var(ŷ) + var(y − ŷ))`, which always lies in `[0, 1]`.
pub fn baseline_r2(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let var_yhat = sample_variance(yhat)?;
    let var_res = residual_variance(y, yhat.iter().copied())?;
    baseline_from_parts(var_yhat, var_res)
}

fn baseline_from_parts(var_yhat: f64, var_res: f64) -> Result<f64> {
    let total = var_yhat + var_res;
    if total <= 0.0 {
        return Err(Error::DegenerateInput(
            "predictions and residuals both have zero variance".into(),
        ));
    }
    Ok(var_yhat / total)
}

fn check_attributions(yhat: &[f64], phi: &ShapleyMatrix) -> Result<()> {
    if phi.n_instances() != yhat.len() {
        return Err(Error::Shape(format!(
            "attribution matrix has {} rows but there are {} predictions",
            phi.n_instances(),
            yhat.len()
        )));
    }
    Ok(())
}

/// Entry `(i, f)` is `ŷᵢ − φᵢ^(f)`: the prediction with feature `f`'s
/// contribution removed.
pub fn shapley_modified_predictions(yhat: &[f64], phi: &ShapleyMatrix) -> Result<Array2<f64>> {
    check_attributions(yhat, phi)?;
    let values = phi.values();
    Ok(Array2::from_shape_fn(values.dim(), |(i, f)| yhat[i] - values[[i, f]]))
}

/// Which numerator σ_unique uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaForm {
    /// `Σ_f [var(y − ŷ_shap^(f)) − var(y − ŷ)]`: the summed increase in
    /// residual variance. Equals 1 for OLS on uncorrelated features.
    #[default]
    ResidualIncrease,
    /// `Σ_f var(y − ŷ_shap^(f))`, the raw residual variances without
    /// subtracting the baseline. Kept for comparison only.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaUnique {
    pub raw: f64,
    /// `raw` clamped to `[0, 1]`.
    pub clamped: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecomposeOptions {
    pub sigma_form: SigmaForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Decomposed,
    /// No feature's removal increases residual variance, so there is nothing
    /// to normalize; every feature gets 0.
    AllFeaturesNull,
}

#[derive(Debug, Clone, PartialEq)]
pub struct R2Decomposition {
    pub outcome: Outcome,
    pub baseline_r2: f64,
    pub feature_r2: Vec<f64>,
    /// Simplex weights; all zero when `outcome` is `AllFeaturesNull`.
    pub feature_shares: Vec<f64>,
    /// `min(var_res_baseline / var_res_shap^(f), 1)`.
    pub variance_ratios: Vec<f64>,
    /// Features whose removal reduced residual variance, so their ratio was
    /// clamped to 1.
    pub clamped: Vec<bool>,
    pub residual_variance: f64,
    pub modified_residual_variances: Vec<f64>,
    /// `None` when the model explains no variance (see
    /// [`Error::ModelExplainsNothing`]).
    pub sigma_unique: Option<SigmaUnique>,
    pub sigma_form: SigmaForm,
    /// Feature indices by descending `feature_r2`; ties keep index order.
    pub ranking: Vec<usize>,
}

impl R2Decomposition {
    /// 1-based rank of `feature`.
    pub fn rank_of(&self, feature: usize) -> usize {
        self.ranking.iter().position(|&f| f == feature).map_or(0, |p| p + 1)
    }
}

/// Variances every step of the decomposition needs.
struct VarianceProfile {
    var_y: f64,
    var_yhat: f64,
    var_res: f64,
    var_res_shap: Vec<f64>,
}

impl VarianceProfile {
    fn compute(y: &[f64], yhat: &[f64], phi: &ShapleyMatrix) -> Result<Self> {
        check_pair(y, yhat)?;
        check_attributions(yhat, phi)?;
        let var_y = outcome_variance(y)?;
        let var_yhat = sample_variance(yhat)?;
        let var_res = residual_variance(y, yhat.iter().copied())?;
        let modified = shapley_modified_predictions(yhat, phi)?;
        let var_res_shap = modified
            .columns()
            .into_iter()
            .map(|col| residual_variance(y, col.iter().copied()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { var_y, var_yhat, var_res, var_res_shap })
    }

    fn sigma(&self, form: SigmaForm) -> Result<SigmaUnique> {
        let denom = self.var_y - self.var_res;
        if denom.is_nan() || denom <= 0.0 {
            return Err(Error::ModelExplainsNothing(denom));
        }
        let numer: f64 = match form {
            SigmaForm::ResidualIncrease => self.var_res_shap.iter().map(|v| v - self.var_res).sum(),
            SigmaForm::AsPrinted => self.var_res_shap.iter().sum(),
        };
        let raw = numer / denom;
        Ok(SigmaUnique { raw, clamped: raw.clamp(0.0, 1.0) })
    }
}

/// σ_unique: summed increase in residual variance from removing each
/// feature, over the variance the model explains,
/// `var(y − ȳ) − var(y − ŷ)`.
pub fn unique_variance_ratio(
    y: &[f64],
    yhat: &[f64],
    phi: &ShapleyMatrix,
    form: SigmaForm,
) -> Result<SigmaUnique> {
    VarianceProfile::compute(y, yhat, phi)?.sigma(form)
}

/// Splits the baseline R² over features in proportion to how much removing
/// each feature's attributions inflates residual variance.
///
/// A model that explains nothing still decomposes (with `sigma_unique`
/// left empty); only malformed input is an error.
pub fn feature_r2_decomposition(
    y: &[f64],
    yhat: &[f64],
    phi: &ShapleyMatrix,
    options: DecomposeOptions,
) -> Result<R2Decomposition> {
    let profile = VarianceProfile::compute(y, yhat, phi)?;
    let baseline = baseline_from_parts(profile.var_yhat, profile.var_res)?;

    let mut variance_ratios = Vec::with_capacity(profile.var_res_shap.len());
    let mut clamped = Vec::with_capacity(profile.var_res_shap.len());
    for &v in &profile.var_res_shap {
        // Also covers 0/0 when both residual variances vanish.
        if v <= profile.var_res {
            variance_ratios.push(1.0);
            clamped.push(v < profile.var_res);
        } else {
            variance_ratios.push(profile.var_res / v);
            clamped.push(false);
        }
    }

    let weights: Vec<f64> = variance_ratios.iter().map(|r| baseline - r * baseline).collect();
    let total: f64 = weights.iter().sum();
    let (outcome, feature_shares, feature_r2) = if total > 0.0 {
        let shares: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let r2 = shares.iter().map(|s| s * baseline).collect();
        (Outcome::Decomposed, shares, r2)
    } else {
        let zeros = vec![0.0; weights.len()];
        (Outcome::AllFeaturesNull, zeros.clone(), zeros)
    };

    let mut ranking: Vec<usize> = (0..feature_r2.len()).collect();
    ranking.sort_by(|&a, &b| feature_r2[b].total_cmp(&feature_r2[a]));

    let sigma_unique = match profile.sigma(options.sigma_form) {
        Ok(s) => Some(s),
        Err(Error::ModelExplainsNothing(_)) => None,
        Err(e) => return Err(e),
    };

    Ok(R2Decomposition {
        outcome,
        baseline_r2: baseline,
        feature_r2,
        feature_shares,
        variance_ratios,
        clamped,
        residual_variance: profile.var_res,
        modified_residual_variances: profile.var_res_shap,
        sigma_unique,
        sigma_form: options.sigma_form,
        ranking,
    })
}

/// Baseline R², per-feature shares and σ_unique in one call.
pub fn decompose(
    y: &[f64],
    yhat: &[f64],
    phi: &ShapleyMatrix,
    options: DecomposeOptions,
) -> Result<R2Decomposition> {
    feature_r2_decomposition(y, yhat, phi, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn ingested(phi: Array2<f64>) -> ShapleyMatrix {
        ShapleyMatrix::from_values(phi, 0.0).unwrap()
    }

    #[test]
    fn variance_examples() {
        assert_eq!(sample_variance(&[1.0, 1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(sample_variance(&[0.0, 2.0]).unwrap(), 2.0);
        assert!((sample_variance(&[0.0, 1.0, 2.0, 3.0]).unwrap() - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn variance_errors() {
        assert!(matches!(sample_variance(&[1.0]), Err(Error::DegenerateInput(_))));
        assert!(matches!(sample_variance(&[1.0, f64::INFINITY]), Err(Error::InvalidValue(_))));
    }

    #[test]
    fn classical_r2_examples() {
        let y = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(classical_r2(&y, &y).unwrap(), 1.0);
        assert_eq!(classical_r2(&y, &[2.0; 4]).unwrap(), 0.0);
        assert!((classical_r2(&y, &[0.0, 2.0, 4.0, 6.0]).unwrap() - 4.0).abs() < 1e-14);
        assert!(matches!(classical_r2(&[1.0, 1.0], &[0.0, 1.0]), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn baseline_r2_examples() {
        let y = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(baseline_r2(&y, &y).unwrap(), 1.0);
        assert_eq!(baseline_r2(&y, &[5.0; 4]).unwrap(), 0.0);
        // var(ŷ) = 83/48, var(res) = 11/48 by hand.
        let r2 = baseline_r2(&y, &[0.5, 1.0, 1.5, 3.5]).unwrap();
        assert!((r2 - 83.0 / 94.0).abs() < 1e-14, "{r2}");
        assert!(matches!(baseline_r2(&[1.0, 1.0], &[1.0, 1.0]), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn modified_predictions() {
        let phi = ingested(array![[0.5], [-0.5]]);
        let m = shapley_modified_predictions(&[1.0, 2.0], &phi).unwrap();
        assert_eq!(m, array![[0.5], [2.5]]);

        let bad = ingested(array![[0.5], [-0.5], [0.0]]);
        assert!(matches!(shapley_modified_predictions(&[1.0, 2.0], &bad), Err(Error::Shape(_))));
    }

    #[test]
    fn single_feature_takes_everything() {
        let y = [1.0, 3.0, 2.0, 5.0, 4.0];
        let yhat = [1.5, 2.5, 2.5, 4.5, 4.0];
        let mean = yhat.iter().sum::<f64>() / 5.0;
        let phi = ingested(Array2::from_shape_fn((5, 1), |(i, _)| yhat[i] - mean));
        let d = decompose(&y, &yhat, &phi, DecomposeOptions::default()).unwrap();
        assert_eq!(d.outcome, Outcome::Decomposed);
        assert!((d.feature_r2[0] - d.baseline_r2).abs() < 1e-15);
        assert_eq!(d.feature_shares, vec![1.0]);
    }

    #[test]
    fn zero_column_gets_zero() {
        let y = [1.0, 3.0, 2.0, 5.0, 4.0];
        let yhat = [1.5, 2.5, 2.5, 4.5, 4.0];
        let phi = ingested(array![[-1.0, 0.0], [-0.5, 0.0], [-0.5, 0.0], [1.5, 0.0], [0.5, 0.0]]);
        let d = decompose(&y, &yhat, &phi, DecomposeOptions::default()).unwrap();
        assert!((d.feature_r2[0] - d.baseline_r2).abs() < 1e-15);
        assert_eq!(d.feature_r2[1], 0.0);
        assert_eq!(d.variance_ratios[1], 1.0);
        assert!(!d.clamped[1]);
        assert_eq!(d.ranking, vec![0, 1]);
    }

    #[test]
    fn identity_fixture() {
        let y = [0.0, 1.0, 2.0, 3.0];
        let phi = ingested(array![[-1.5], [-0.5], [0.5], [1.5]]);
        let d = decompose(&y, &y, &phi, DecomposeOptions::default()).unwrap();
        assert_eq!(d.baseline_r2, 1.0);
        assert_eq!(d.feature_r2, vec![1.0]);
    }

    #[test]
    fn all_null_attributions() {
        let y = [0.0, 1.0, 2.0, 4.0];
        let yhat = [0.5, 1.0, 2.5, 3.0];
        let phi = ingested(Array2::zeros((4, 3)));
        let d = decompose(&y, &yhat, &phi, DecomposeOptions::default()).unwrap();
        assert_eq!(d.outcome, Outcome::AllFeaturesNull);
        assert_eq!(d.feature_r2, vec![0.0; 3]);
        assert!(d.baseline_r2 > 0.0);
        assert_eq!(d.sigma_unique.unwrap().raw, 0.0);
    }

    #[test]
    fn adversarial_attributions_are_clamped() {
        // Removing feature 1 moves predictions onto y, shrinking the residuals.
        let y = [0.0, 1.0, 2.0, 3.0, 4.0];
        let yhat = [0.5, 0.5, 2.5, 2.5, 4.5];
        let phi = ingested(array![
            [0.5, 0.5],
            [-1.0, -0.5],
            [0.0, 0.5],
            [-1.0, -0.5],
            [2.0, 0.5]
        ]);
        let d = decompose(&y, &yhat, &phi, DecomposeOptions::default()).unwrap();
        assert!(d.clamped[1]);
        assert_eq!(d.feature_r2[1], 0.0);
        assert!(d.feature_r2.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn sigma_requires_explained_variance() {
        let y = [0.0, 1.0, 2.0, 3.0];
        let yhat = [3.0, 2.0, 1.0, 0.0];
        let phi = ingested(array![[1.5], [0.5], [-0.5], [-1.5]]);
        let err = unique_variance_ratio(&y, &yhat, &phi, SigmaForm::ResidualIncrease).unwrap_err();
        assert!(matches!(err, Error::ModelExplainsNothing(_)));
        let d = decompose(&y, &yhat, &phi, DecomposeOptions::default()).unwrap();
        assert!(d.sigma_unique.is_none());
    }

    #[test]
    fn rejects_constant_outcome() {
        let phi = ingested(array![[0.0], [0.0]]);
        let err = decompose(&[1.0, 1.0], &[1.0, 2.0], &phi, DecomposeOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateInput(_)));
    }

    #[test]
    fn ties_rank_by_index() {
        let y = [0.0, 1.0, 2.0, 3.0];
        let yhat = [0.0, 1.0, 2.0, 3.0];
        let phi = ingested(array![[0.0, -0.75, -0.75], [0.0, -0.25, -0.25], [0.0, 0.25, 0.25], [0.0, 0.75, 0.75]]);
        let d = decompose(&y, &yhat, &phi, DecomposeOptions::default()).unwrap();
        assert_eq!(d.ranking, vec![1, 2, 0]);
        assert_eq!(d.rank_of(0), 3);
    }
}
