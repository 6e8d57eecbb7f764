mod common;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use shapley_r2::metrics::{baseline_r2, classical_r2, sample_variance};
use shapley_r2::models::{fit_ols, fit_stump_ensemble, fit_to_target_r2, training_r2};
use shapley_r2::shapley::{predict_all, Predictor};
use shapley_r2::Dataset;

fn dataset(rows: &[Vec<f64>], y: &[f64]) -> Dataset {
    let x = Array2::from_shape_fn((rows.len(), rows[0].len()), |(i, j)| rows[i][j]);
    Dataset::unnamed(x, y.to_vec()).unwrap()
}

fn six(n: usize) -> Dataset {
    let (rows, y) = common::synthetic_six(n, 42);
    dataset(&rows, &y)
}

#[test]
fn ols_matches_normal_equations_fixture() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/ols10.json");
    let want: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let rows: Vec<Vec<f64>> = serde_json::from_value(want["features"].clone()).unwrap();
    let y: Vec<f64> = serde_json::from_value(want["target"].clone()).unwrap();
    let m = fit_ols(&dataset(&rows, &y)).unwrap();
    assert!((m.intercept() - want["intercept"].as_f64().unwrap()).abs() < 1e-8);
    for (j, c) in m.coefficients().iter().enumerate() {
        assert!((c - want["coefficients"][j].as_f64().unwrap()).abs() < 1e-8);
    }
}

#[test]
fn ols_residuals_are_orthogonal_and_variance_splits() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let n = rng.random_range(20..200);
        let f = rng.random_range(1..6);
        let x = Array2::from_shape_simple_fn((n, f), || rng.random_range(-3.0..3.0));
        let y: Vec<f64> = (0..n)
            .map(|i| x.row(i).iter().enumerate().map(|(j, v)| (j as f64 - 1.5) * v).sum::<f64>() + rng.random_range(-2.0..2.0))
            .collect();
        let d = Dataset::unnamed(x, y.clone()).unwrap();
        let m = fit_ols(&d).unwrap();
        let yhat = predict_all(&m, d.features());
        let res: Vec<f64> = y.iter().zip(&yhat).map(|(a, b)| a - b).collect();
        let rbar = res.iter().sum::<f64>() / n as f64;
        for col in d.features().columns() {
            let cbar = col.sum() / n as f64;
            let cov: f64 = res.iter().zip(col).map(|(r, c)| (r - rbar) * (c - cbar)).sum::<f64>() / (n - 1) as f64;
            assert!(cov.abs() <= 1e-9, "cov {cov}");
        }
        let split = sample_variance(&yhat).unwrap() + sample_variance(&res).unwrap();
        assert!((sample_variance(&y).unwrap() - split).abs() <= 1e-9);
        assert!((classical_r2(&y, &yhat).unwrap() - baseline_r2(&y, &yhat).unwrap()).abs() <= 1e-9);
    }
}

/// Straightforward boosting loop: every threshold is tried by recomputing
/// both leaf means and the post-split SSE from scratch.
fn reference_boosting(rows: &[Vec<f64>], y: &[f64], iterations: usize, rate: f64) -> Vec<f64> {
    let n = y.len();
    let init = y.iter().sum::<f64>() / n as f64;
    let mut pred = vec![init; n];
    for _ in 0..iterations {
        let res: Vec<f64> = (0..n).map(|i| y[i] - pred[i]).collect();
        let mut best: Option<(f64, usize, f64, f64, f64)> = None;
        for f in 0..rows[0].len() {
            let mut values: Vec<f64> = rows.iter().map(|r| r[f]).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for w in values.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let (l, r): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| rows[i][f] <= t);
                let lm = l.iter().map(|&i| res[i]).sum::<f64>() / l.len() as f64;
                let rm = r.iter().map(|&i| res[i]).sum::<f64>() / r.len() as f64;
                let sse: f64 = l.iter().map(|&i| (res[i] - lm).powi(2)).sum::<f64>()
                    + r.iter().map(|&i| (res[i] - rm).powi(2)).sum::<f64>();
                if best.is_none_or(|b| sse < b.0 - 1e-12) {
                    best = Some((sse, f, t, lm, rm));
                }
            }
        }
        let (_, f, t, lm, rm) = best.unwrap();
        for i in 0..n {
            pred[i] += rate * if rows[i][f] <= t { lm } else { rm };
        }
    }
    pred
}

#[test]
fn boosting_matches_reference_loop() {
    let (rows, y) = common::synthetic_six(50, 7);
    let d = dataset(&rows, &y);
    let model = fit_stump_ensemble(&d, 10, 0.1).unwrap();
    let want = reference_boosting(&rows, &y, 10, 0.1);
    for (got, want) in predict_all(&model, d.features()).iter().zip(&want) {
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }
}

/// The variance-ratio form of R² is not monotone in general (it can dip by
/// ~1e-5 deep into the overfitting regime, around R² ≈ 0.88 here), so the
/// check covers the rounds that span the target sweep.
#[test]
fn boosting_training_r2_is_monotone_over_sweep_range() {
    let d = six(500);
    let full = fit_stump_ensemble(&d, 1500, 0.1).unwrap();
    let mut last = 0.0;
    for k in 1..=1500 {
        let r2 = training_r2(&full.truncated(k), &d).unwrap();
        assert!(r2 >= last, "R² fell from {last} to {r2} at {k} rounds");
        last = r2;
        if r2 > 0.6 {
            return;
        }
    }
    panic!("sweep range never reached R² 0.6");
}

#[test]
fn boosting_fixed_point_on_noiseless_data() {
    let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, (i % 3) as f64]).collect();
    let y: Vec<f64> = rows.iter().map(|r| r[0] * r[0] - 2.0 * r[1]).collect();
    let d = dataset(&rows, &y);
    let model = fit_stump_ensemble(&d, 3000, 0.5).unwrap();
    let yhat = predict_all(&model, d.features());
    assert!(y.iter().zip(&yhat).all(|(a, b)| (a - b).abs() < 1e-6));
    assert!(baseline_r2(&y, &yhat).unwrap() > 1.0 - 1e-9);
}

#[test]
fn refits_are_bit_identical() {
    let d = six(200);
    assert_eq!(fit_stump_ensemble(&d, 40, 0.2).unwrap(), fit_stump_ensemble(&d, 40, 0.2).unwrap());
    assert_eq!(fit_ols(&d).unwrap(), fit_ols(&d).unwrap());
}

#[test]
fn target_r2_bisection_hits_targets() {
    let d = six(500);
    for target in [0.05, 0.1, 0.2, 0.35, 0.5] {
        let fit = fit_to_target_r2(&d, target, 0.1, 3000).unwrap();
        assert!((fit.achieved_r2 - target).abs() <= 0.01, "target {target}: got {}", fit.achieved_r2);
        assert_eq!(fit.achieved_r2, training_r2(&fit.model, &d).unwrap());
        assert!(fit.model.n_features() == 6);
    }
}

#[test]
fn unreachable_target_is_reported() {
    let d = six(100);
    let err = fit_to_target_r2(&d, 0.99, 0.1, 5).unwrap_err();
    assert!(matches!(err, shapley_r2::Error::TargetUnreachable { .. }));
}
