use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{default_feature_names, ensure_finite_matrix};
use crate::error::{Error, Result};

/// How a [`ShapleyMatrix`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    Sampled { permutations: usize, seed: u64 },
    ClosedFormLinear,
    Ingested,
}

/// Per-instance attributions `phi[i, f]` plus the base value `phi0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyMatrix {
    phi: Array2<f64>,
    phi0: f64,
    feature_names: Vec<String>,
    provenance: Provenance,
}

impl ShapleyMatrix {
    pub fn new(
        phi: Array2<f64>,
        phi0: f64,
        feature_names: Vec<String>,
        provenance: Provenance,
    ) -> Result<Self> {
        if feature_names.len() != phi.ncols() {
            return Err(Error::Shape(format!(
                "attribution matrix has {} columns but {} feature names",
                phi.ncols(),
                feature_names.len()
            )));
        }
        if phi.ncols() == 0 {
            return Err(Error::DegenerateInput("attribution matrix has no feature columns".into()));
        }
        if !phi0.is_finite() {
            return Err(Error::InvalidValue(format!("base value {phi0} is not finite")));
        }
        ensure_finite_matrix("phi", phi.view())?;
        Ok(Self { phi, phi0, feature_names, provenance })
    }

    /// Attributions with generated feature names, tagged as ingested.
    pub fn from_values(phi: Array2<f64>, phi0: f64) -> Result<Self> {
        let names = default_feature_names(phi.ncols());
        Self::new(phi, phi0, names, Provenance::Ingested)
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.phi.view()
    }

    pub fn column(&self, feature: usize) -> ArrayView1<'_, f64> {
        self.phi.column(feature)
    }

    pub fn phi0(&self) -> f64 {
        self.phi0
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn n_instances(&self) -> usize {
        self.phi.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.phi.ncols()
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features() {
            return Err(Error::Shape(format!(
                "{} names given for {} features",
                names.len(),
                self.n_features()
            )));
        }
        self.feature_names = names;
        Ok(self)
    }

    /// `phi0 + Σ_f phi[i, f]` for every instance.
    pub fn reconstructed_predictions(&self) -> Vec<f64> {
        self.phi.rows().into_iter().map(|row| self.phi0 + row.sum()).collect()
    }

    /// Largest relative violation of `phi0 + Σ_f phi[i, f] = yhat[i]`,
    /// measured against `max(1, |yhat[i]|)`.
    pub fn max_additivity_error(&self, yhat: &[f64]) -> Result<f64> {
        if yhat.len() != self.n_instances() {
            return Err(Error::Shape(format!(
                "{} predictions for {} attribution rows",
                yhat.len(),
                self.n_instances()
            )));
        }
        Ok(self
            .reconstructed_predictions()
            .iter()
            .zip(yhat)
            .map(|(r, p)| (r - p).abs() / p.abs().max(1.0))
            .fold(0.0, f64::max))
    }
}
