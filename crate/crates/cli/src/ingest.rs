//! CSV ingestion. Everything is validated before any computation runs:
//! missing columns, unparsable or non-finite cells and ragged rows are
//! reported with their line and column.

use std::path::Path;

use ndarray::Array2;

use crate::failure::{CliResult, Failure};

pub const PHI_PREFIX: &str = "phi_";

struct Table {
    headers: Vec<String>,
    /// `(line, cells)` per record; lines are 1-based and count the header.
    rows: Vec<(u64, Vec<String>)>,
}

fn read_table(path: &Path) -> CliResult<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Failure::input(format!("{}: cannot read header row: {e}", path.display())))?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.iter().all(String::is_empty) {
        return Err(Failure::input(format!("{}: header row is empty", path.display())));
    }
    for (k, h) in headers.iter().enumerate() {
        if h.is_empty() {
            return Err(Failure::input(format!("{}: header column {} is blank", path.display(), k + 1)));
        }
        if headers[..k].contains(h) {
            return Err(Failure::input(format!("{}: duplicate column '{h}'", path.display())));
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Failure::input(format!("{}: line {line}: {e}", path.display()))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push((line, record.iter().map(str::to_owned).collect()));
    }
    if rows.is_empty() {
        return Err(Failure::input(format!("{}: no data rows", path.display())));
    }
    Ok(Table { headers, rows })
}

impl Table {
    fn index_of(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn require(&self, name: &str, path: &Path) -> CliResult<usize> {
        self.index_of(name)
            .ok_or_else(|| Failure::input(format!("{}: missing required column '{name}'", path.display())))
    }

    fn parse_column(&self, col: usize, path: &Path) -> CliResult<Vec<f64>> {
        self.rows
            .iter()
            .map(|(line, cells)| parse_cell(&cells[col], *line, &self.headers[col], path))
            .collect()
    }
}

fn parse_cell(raw: &str, line: u64, column: &str, path: &Path) -> CliResult<f64> {
    let at = || format!("{}: line {line}, column '{column}'", path.display());
    if raw.is_empty() {
        return Err(Failure::input(format!("{}: missing value", at())));
    }
    let v: f64 = raw
        .parse()
        .map_err(|_| Failure::input(format!("{}: cannot parse '{raw}' as a number", at())))?;
    if !v.is_finite() {
        return Err(Failure::input(format!("{}: value '{raw}' is not finite", at())));
    }
    Ok(v)
}

/// Inputs for `decompose`.
#[derive(Debug)]
pub struct DecomposeInput {
    pub y: Vec<f64>,
    pub yhat: Vec<f64>,
    pub phi: Array2<f64>,
    pub feature_names: Vec<String>,
    /// Per-row base values from a `phi0` column, if present.
    pub phi0: Option<Vec<f64>>,
    pub ignored_columns: Vec<String>,
}

pub fn read_decompose_input(path: &Path) -> CliResult<DecomposeInput> {
    let table = read_table(path)?;
    let y_col = table.require("y", path)?;
    let yhat_col = table.require("yhat", path)?;
    let phi_cols: Vec<usize> = (0..table.headers.len())
        .filter(|&k| table.headers[k].starts_with(PHI_PREFIX))
        .collect();
    if phi_cols.is_empty() {
        return Err(Failure::input(format!(
            "{}: no attribution columns; expected at least one column named '{PHI_PREFIX}<feature>'",
            path.display()
        )));
    }
    let feature_names: Vec<String> = phi_cols
        .iter()
        .map(|&k| table.headers[k][PHI_PREFIX.len()..].to_owned())
        .collect();
    if let Some(k) = phi_cols.iter().find(|&&k| table.headers[k].len() == PHI_PREFIX.len()) {
        return Err(Failure::input(format!(
            "{}: column {} is named '{PHI_PREFIX}' with no feature name",
            path.display(),
            k + 1
        )));
    }
    let phi0_col = table.index_of("phi0");
    let ignored_columns = table
        .headers
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != y_col && *k != yhat_col && Some(*k) != phi0_col && !phi_cols.contains(k))
        .map(|(_, h)| h.clone())
        .collect();

    let y = table.parse_column(y_col, path)?;
    let yhat = table.parse_column(yhat_col, path)?;
    let columns: Vec<Vec<f64>> = phi_cols.iter().map(|&k| table.parse_column(k, path)).collect::<CliResult<_>>()?;
    let phi0 = phi0_col.map(|k| table.parse_column(k, path)).transpose()?;
    let phi = Array2::from_shape_fn((y.len(), columns.len()), |(i, j)| columns[j][i]);
    Ok(DecomposeInput { y, yhat, phi, feature_names, phi0, ignored_columns })
}

/// Inputs for `explain`: the target plus every other column as a feature.
#[derive(Debug)]
pub struct ExplainInput {
    pub features: Array2<f64>,
    pub target: Vec<f64>,
    pub feature_names: Vec<String>,
}

pub fn read_explain_input(path: &Path, target: &str) -> CliResult<ExplainInput> {
    let table = read_table(path)?;
    let target_col = table.index_of(target).ok_or_else(|| {
        Failure::input(format!("{}: target column '{target}' not found", path.display()))
    })?;
    let feature_cols: Vec<usize> = (0..table.headers.len()).filter(|&k| k != target_col).collect();
    if feature_cols.is_empty() {
        return Err(Failure::input(format!("{}: no feature columns besides '{target}'", path.display())));
    }
    // Name non-numeric columns as a whole before reporting cell-level errors.
    for &k in &feature_cols {
        if let Some((line, cells)) = table.rows.iter().find(|(_, c)| !c[k].is_empty() && c[k].parse::<f64>().is_err()) {
            return Err(Failure::input(format!(
                "{}: column '{}' is not numeric (line {line}: '{}')",
                path.display(),
                table.headers[k],
                cells[k]
            )));
        }
    }
    let target_values = table.parse_column(target_col, path)?;
    let columns: Vec<Vec<f64>> = feature_cols.iter().map(|&k| table.parse_column(k, path)).collect::<CliResult<_>>()?;
    let features = Array2::from_shape_fn((target_values.len(), columns.len()), |(i, j)| columns[j][i]);
    Ok(ExplainInput {
        features,
        target: target_values,
        feature_names: feature_cols.iter().map(|&k| table.headers[k].clone()).collect(),
    })
}
