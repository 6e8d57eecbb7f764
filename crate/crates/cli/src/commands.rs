use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};
use shapley_r2::metrics::SigmaForm;
use shapley_r2::models::{fit_ols, fit_stump_ensemble, fit_to_target_r2, Model};
use shapley_r2::shapley::{exact_shapley, linear_shapley, predict_all, sampled_shapley};
use shapley_r2::sim::{run_grid, GridSpec, ShapleyEstimator};
use shapley_r2::{decompose, Background, DecomposeOptions, Dataset, Provenance as Method, SamplingConfig, ShapleyMatrix};

use crate::failure::{CliResult, Failure};
use crate::ingest::{read_decompose_input, read_explain_input};
use crate::report::{emit, grid_csv, shapley_csv, Provenance, Report};
use crate::{CommonArgs, DecomposeArgs, ExplainArgs, ModelKind, SimulateArgs};

/// Relative tolerance for the φ₀ + Σφ = ŷ check on ingested attributions.
const ADDITIVITY_TOLERANCE: f64 = 1e-6;

fn options(common: &CommonArgs) -> DecomposeOptions {
    DecomposeOptions {
        sigma_form: if common.eq7_as_printed { SigmaForm::AsPrinted } else { SigmaForm::ResidualIncrease },
    }
}

fn sigma_form_name(common: &CommonArgs) -> &'static str {
    if common.eq7_as_printed {
        "as_printed"
    } else {
        "residual_increase"
    }
}

/// Runs `f` on a pool of `threads` workers, or on rayon's global pool.
fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> CliResult<T> + Send) -> CliResult<T> {
    match threads {
        None => f(),
        Some(0) => Err(Failure::input("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::input(format!("cannot start {n} worker threads: {e}")))?
            .install(f),
    }
}

pub fn run_decompose(args: &DecomposeArgs) -> CliResult<()> {
    let input = read_decompose_input(&args.input)?;
    let n = input.y.len();
    let phi0_rows: Option<Vec<f64>> = match (args.phi0, &input.phi0) {
        (Some(v), _) => {
            if !v.is_finite() {
                return Err(Failure::input("--phi0 must be finite"));
            }
            Some(vec![v; n])
        }
        (None, Some(col)) => Some(col.clone()),
        (None, None) => None,
    };
    let phi = ShapleyMatrix::new(
        input.phi.clone(),
        phi0_rows.as_ref().map_or(0.0, |p| p[0]),
        input.feature_names.clone(),
        Method::Ingested,
    )?;

    let mut warnings: Vec<String> = input
        .ignored_columns
        .iter()
        .map(|c| format!("ignored column '{c}' (not y, yhat, phi0 or {}<name>)", crate::ingest::PHI_PREFIX))
        .collect();
    if let Some(phi0) = &phi0_rows {
        let sums: Vec<f64> = input.phi.rows().into_iter().map(|r| r.sum()).collect();
        let bad: Vec<(usize, f64)> = (0..n)
            .map(|i| (i, (phi0[i] + sums[i] - input.yhat[i]).abs() / input.yhat[i].abs().max(1.0)))
            .filter(|(_, e)| *e > ADDITIVITY_TOLERANCE)
            .collect();
        if let Some(&(worst_row, worst)) = bad.iter().max_by(|a, b| a.1.total_cmp(&b.1)) {
            warnings.push(format!(
                "additivity violated on {} of {n} rows (worst: data row {}, relative error {worst:e}); attributions may not belong to these predictions",
                bad.len(),
                worst_row + 1
            ));
        }
    }

    let d = decompose(&input.y, &input.yhat, &phi, options(&args.common))?;
    let mut config = Map::new();
    config.insert("sigma_form".into(), json!(sigma_form_name(&args.common)));
    if let Some(v) = args.phi0 {
        config.insert("phi0".into(), json!(v));
    }
    let provenance = Provenance::new("decompose", Some(&args.input), config, None);
    let report = Report::new(&d, &input.feature_names, provenance, warnings);
    emit(&report.to_json(), args.common.out.as_deref())
}



pub fn run_explain(args: &ExplainArgs) -> CliResult<()> {
    with_threads(args.shapley.threads, || explain_inner(args))
}

fn explain_inner(args: &ExplainArgs) -> CliResult<()> {
    let input = read_explain_input(&args.data, &args.target)?;
    let names = input.feature_names.clone();
    let core_err = |e| Failure::from_core(e, &names);
    let dataset = Dataset::new(input.features, input.target, input.feature_names.clone()).map_err(core_err)?;
    let sh = &args.shapley;

    let mut config = Map::new();
    config.insert("target".into(), json!(args.target));
    let model = match args.model {
        ModelKind::Ols => {
            config.insert("model".into(), json!("ols"));
            Model::Linear(fit_ols(&dataset).map_err(core_err)?)
        }
        ModelKind::Stumps => {
            let ensemble = match args.target_r2 {
                Some(target) => fit_to_target_r2(&dataset, target, args.learning_rate, args.max_iterations)
                    .map_err(core_err)?
                    .model,
                None => fit_stump_ensemble(&dataset, args.iterations, args.learning_rate).map_err(core_err)?,
            };
            config.insert("model".into(), json!("stumps"));
            config.insert("iterations".into(), json!(ensemble.iterations()));
            config.insert("learning_rate".into(), json!(args.learning_rate));
            if let Some(t) = args.target_r2 {
                config.insert("target_r2".into(), json!(t));
                config.insert("max_iterations".into(), json!(args.max_iterations));
            }
            Model::Stumps(ensemble)
        }
    };
    let yhat = predict_all(&model, dataset.features());

    let mut background = Background::new(dataset.features().to_owned()).map_err(core_err)?;
    if let Some(k) = sh.background_subsample {
        background = background.subsample(k, sh.seed).map_err(core_err)?;
        config.insert("background_subsample".into(), json!(k));
    }
    let phi = if sh.sampled {
        let sampling = SamplingConfig { permutations: sh.permutations, seed: sh.seed, background_subsample: None };
        config.insert("permutations".into(), json!(sh.permutations));
        sampled_shapley(&model, dataset.features(), &background, &sampling)
    } else {
        match &model {
            Model::Linear(m) => linear_shapley(m, dataset.features(), &background),
            Model::Stumps(_) => exact_shapley(&model, dataset.features(), &background),
        }
    }
    .and_then(|p| p.with_feature_names(names.clone()))
    .map_err(core_err)?;
    config.insert("shapley".into(), serde_json::to_value(phi.provenance()).expect("serializable"));
    config.insert("sigma_form".into(), json!(sigma_form_name(&args.common)));

    let d = decompose(dataset.target(), &yhat, &phi, options(&args.common)).map_err(core_err)?;
    if let Some(path) = &args.emit_shap {
        write_file(path, &shapley_csv(dataset.target(), &yhat, &phi, &names))?;
    }
    let provenance = Provenance::new("explain", Some(&args.data), config, Some(sh.seed));
    let report = Report::new(&d, &names, provenance, Vec::new());
    emit(&report.to_json(), args.common.out.as_deref())
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

fn parse_configs(raw: &str) -> CliResult<Vec<Vec<f64>>> {
    raw.split(';')
        .map(|group| {
            group
                .split(',')
                .map(|v| {
                    let v = v.trim();
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Failure::input(format!("--coefficients: '{v}' is not a finite number")))
                })
                .collect()
        })
        .collect()
}

fn grid_spec(args: &SimulateArgs) -> CliResult<GridSpec> {
    let mut spec = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::input(format!("{}: invalid grid spec: {e}", path.display())))?
        }
        None => GridSpec::default(),
    };
    if let Some(rho) = &args.rho {
        spec.rho_values = rho.clone();
    }
    if let Some(raw) = &args.coefficients {
        spec.coefficient_configs = parse_configs(raw)?;
        spec.feature_count = spec.coefficient_configs[0].len();
    }
    if let Some(n) = args.n_samples {
        spec.n_samples = n;
    }
    if args.noise_sd.is_some() {
        spec.noise_sd = args.noise_sd;
    }
    if let Some(seed) = args.seed {
        spec.master_seed = seed;
    }
    if args.sampled {
        spec.estimator = ShapleyEstimator::Sampled {
            permutations: args.permutations,
            background_subsample: args.background_subsample,
        };
    }
    if spec.rho_values.iter().any(|r| !r.is_finite()) {
        return Err(Failure::input("rho values must be finite"));
    }
    Ok(spec)
}

pub fn run_simulate(args: &SimulateArgs) -> CliResult<()> {
    let spec = grid_spec(args)?;
    let grid = with_threads(args.threads, || Ok(run_grid(&spec)?))?;
    if let Some(path) = &args.out {
        write_file(path, &grid_csv(&grid))?;
    }
    let mut config = Map::new();
    config.insert("grid".into(), serde_json::to_value(&spec).expect("serializable"));
    let provenance = Provenance::new("simulate", args.config.as_deref(), config, Some(spec.master_seed));
    let summary: Value = json!({
        "cells": grid.cells.iter().map(Vec::len).sum::<usize>(),
        "rows": grid.trends(),
        "provenance": provenance,
    });
    let mut text = serde_json::to_string_pretty(&summary).expect("serializable");
    text.push('\n');
    emit(&text, None)
}
