use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use shapley_r2::metrics::SigmaForm;
use shapley_r2::sim::SimulationGrid;
use shapley_r2::{Outcome, R2Decomposition, ShapleyMatrix};

use crate::failure::{CliResult, Failure};
use crate::ingest::PHI_PREFIX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub name: String,
    pub r2: f64,
    pub share: f64,
    pub variance_ratio: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub input: Option<String>,
    /// Every option that affects the numbers, keyed by flag name.
    pub config: Map<String, Value>,
    pub seed: Option<u64>,
    pub version: String,
}

impl Provenance {
    pub fn new(command: &str, input: Option<&Path>, config: Map<String, Value>, seed: Option<u64>) -> Self {
        Self {
            command: command.to_owned(),
            input: input.map(|p| p.display().to_string()),
            config,
            seed,
            version: env!("CARGO_PKG_VERSION").to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub baseline_r2: f64,
    pub features: Vec<FeatureRecord>,
    pub sigma_unique_raw: Option<f64>,
    pub sigma_unique: Option<f64>,
    pub provenance: Provenance,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(
        d: &R2Decomposition,
        names: &[String],
        provenance: Provenance,
        mut warnings: Vec<String>,
    ) -> Self {
        if d.outcome == Outcome::AllFeaturesNull {
            warnings.push(
                "all features null: removing no feature's attributions increased residual variance, so every feature R² is 0"
                    .into(),
            );
        }
        for (f, &clamped) in d.clamped.iter().enumerate() {
            if clamped {
                warnings.push(format!(
                    "variance ratio for feature '{}' clamped to 1: removing its attributions reduced residual variance",
                    names[f]
                ));
            }
        }
        match d.sigma_unique {
            None => warnings.push(
                "model explains no variance (var(y - mean(y)) <= var(y - yhat)); sigma_unique is undefined".into(),
            ),
            Some(s) if s.raw != s.clamped => warnings.push(format!(
                "sigma_unique_raw = {} lies outside [0, 1]; sigma_unique is clamped",
                s.raw
            )),
            Some(_) => {}
        }
        if d.sigma_form == SigmaForm::AsPrinted {
            warnings.push("sigma_unique uses the raw residual-variance numerator (--eq7-as-printed)".into());
        }
        let features = names
            .iter()
            .enumerate()
            .map(|(f, name)| FeatureRecord {
                name: name.clone(),
                r2: d.feature_r2[f],
                share: d.feature_shares[f],
                variance_ratio: d.variance_ratios[f],
                rank: d.rank_of(f),
            })
            .collect();
        Self {
            baseline_r2: d.baseline_r2,
            features,
            sigma_unique_raw: d.sigma_unique.map(|s| s.raw),
            sigma_unique: d.sigma_unique.map(|s| s.clamped),
            provenance,
            warnings,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Writes `contents` to `out`, or to stdout when `out` is `None`.
pub fn emit(contents: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, contents)
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(contents.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

/// Attribution table in the layout `decompose` reads back:
/// `y,yhat,phi_<name>...,phi0`.
pub fn shapley_csv(y: &[f64], yhat: &[f64], phi: &ShapleyMatrix, names: &[String]) -> String {
    let mut out = String::from("y,yhat");
    for name in names {
        out.push(',');
        out.push_str(PHI_PREFIX);
        out.push_str(name);
    }
    out.push_str(",phi0\n");
    let values = phi.values();
    for i in 0..y.len() {
        out.push_str(&format!("{:?},{:?}", y[i], yhat[i]));
        for v in values.row(i) {
            out.push_str(&format!(",{v:?}"));
        }
        out.push_str(&format!(",{:?}\n", phi.phi0()));
    }
    out
}

/// Long-format grid table: `rho,config_id,status,sigma_unique,baseline_r2`.
pub fn grid_csv(grid: &SimulationGrid) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:?}"));
    let mut out = String::from("rho,config_id,status,sigma_unique,baseline_r2\n");
    for (config_id, row) in grid.cells.iter().enumerate() {
        for cell in row {
            out.push_str(&format!(
                "{:?},{config_id},{},{},{}\n",
                cell.spec.rho,
                cell.status.as_str(),
                opt(cell.sigma_unique),
                opt(cell.baseline_r2)
            ));
        }
    }
    out
}
