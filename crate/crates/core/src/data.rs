use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Feature matrix, outcome vector and feature labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    target: Vec<f64>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, target: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        let (n, f) = features.dim();
        if target.len() != n {
            return Err(Error::Shape(format!(
                "feature matrix has {n} rows but target has {} entries",
                target.len()
            )));
        }
        if feature_names.len() != f {
            return Err(Error::Shape(format!(
                "feature matrix has {f} columns but {} names were given",
                feature_names.len()
            )));
        }
        if f == 0 {
            return Err(Error::DegenerateInput("dataset has no feature columns".into()));
        }
        ensure_finite("target", &target)?;
        ensure_finite_matrix("features", features.view())?;
        Ok(Self { features, target, feature_names })
    }

    /// Builds a dataset with generated names `x0`, `x1`, ...
    pub fn unnamed(features: Array2<f64>, target: Vec<f64>) -> Result<Self> {
        let names = default_feature_names(features.ncols());
        Self::new(features, target, names)
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }
}

pub fn default_feature_names(count: usize) -> Vec<String> {
    (0..count).map(|j| format!("x{j}")).collect()
}

pub(crate) fn ensure_finite(what: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::InvalidValue(format!("{what}[{i}] = {} is not finite", values[i]))),
        None => Ok(()),
    }
}

pub(crate) fn ensure_finite_matrix(what: &str, m: ArrayView2<'_, f64>) -> Result<()> {
    for ((i, j), v) in m.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::InvalidValue(format!("{what}[{i}, {j}] = {v} is not finite")));
        }
    }
    Ok(())
}
