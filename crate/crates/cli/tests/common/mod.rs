//! Brute-force Shapley oracle, written independently of the library's
//! subset-weighted enumeration: it walks every feature ordering and
//! evaluates coalition values directly from the background rows.

#![allow(dead_code)]

pub fn coalition_value(f: &dyn Fn(&[f64]) -> f64, x: &[f64], present: &[bool], background: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for b in background {
        let z: Vec<f64> = (0..x.len()).map(|j| if present[j] { x[j] } else { b[j] }).collect();
        total += f(&z);
    }
    total / background.len() as f64
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Marginal contribution of every feature under every ordering:
/// `result[perm][feature]`.
pub fn contributions_by_ordering(f: &dyn Fn(&[f64]) -> f64, x: &[f64], background: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = x.len();
    permutations(n)
        .into_iter()
        .map(|order| {
            let mut present = vec![false; n];
            let mut out = vec![0.0; n];
            let mut prev = coalition_value(f, x, &present, background);
            for &j in &order {
                present[j] = true;
                let cur = coalition_value(f, x, &present, background);
                out[j] = cur - prev;
                prev = cur;
            }
            out
        })
        .collect()
}

pub fn brute_force_shapley(f: &dyn Fn(&[f64]) -> f64, x: &[f64], background: &[Vec<f64>]) -> Vec<f64> {
    let contribs = contributions_by_ordering(f, x, background);
    let m = contribs.len() as f64;
    (0..x.len()).map(|j| contribs.iter().map(|c| c[j]).sum::<f64>() / m).collect()
}

/// Per-feature standard deviation of a single ordering's contribution.
pub fn ordering_sd(f: &dyn Fn(&[f64]) -> f64, x: &[f64], background: &[Vec<f64>]) -> Vec<f64> {
    let contribs = contributions_by_ordering(f, x, background);
    let m = contribs.len() as f64;
    (0..x.len())
        .map(|j| {
            let mean = contribs.iter().map(|c| c[j]).sum::<f64>() / m;
            (contribs.iter().map(|c| (c[j] - mean).powi(2)).sum::<f64>() / m).sqrt()
        })
        .collect()
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// N × 6 synthetic regression problem with a known additive signal on the
/// first four features, a null fifth feature, and a sixth feature that only
/// correlates with the first.
pub fn synthetic_six(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x0 = draw();
        let x1 = draw();
        let x2 = draw();
        let x3 = draw();
        let x4 = draw();
        let x5 = 0.6 * x0 + 0.8 * draw();
        let signal = 1.5 * x0 + x1.signum() + 0.8 * x2 * x2 - 0.5 * x3;
        y.push(signal + draw());
        rows.push(vec![x0, x1, x2, x3, x4, x5]);
    }
    (rows, y)
}
