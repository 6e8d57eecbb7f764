//! Small dense linear-algebra kernels.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Solves `min ‖A·x − b‖₂` by Householder QR.
///
/// Fails with [`Error::SingularDesign`] when a pivot of R is negligible
/// relative to the largest column norm of `A`.
pub fn least_squares(a: ArrayView2<'_, f64>, b: &[f64]) -> Result<Vec<f64>> {
    let (n, p) = a.dim();
    if b.len() != n {
        return Err(Error::Shape(format!("design has {n} rows but rhs has {}", b.len())));
    }
    if n < p {
        return Err(Error::DegenerateInput(format!(
            "least squares needs at least as many rows as columns ({n} < {p})"
        )));
    }

    let scale = (0..p)
        .map(|j| a.column(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0_f64, f64::max);
    let tol = (n.max(p) as f64) * f64::EPSILON * scale.max(f64::MIN_POSITIVE);

    let mut r: Array2<f64> = a.to_owned();
    let mut qtb = b.to_vec();
    let mut v = vec![0.0; n];

    for k in 0..p {
        let norm = (k..n).map(|i| r[[i, k]] * r[[i, k]]).sum::<f64>().sqrt();
        if norm <= tol {
            return Err(Error::SingularDesign { column: k });
        }
        let alpha = if r[[k, k]] > 0.0 { -norm } else { norm };
        for i in k..n {
            v[i] = r[[i, k]];
        }
        v[k] -= alpha;
        let vtv: f64 = (k..n).map(|i| v[i] * v[i]).sum();

        for j in k..p {
            let dot: f64 = (k..n).map(|i| v[i] * r[[i, j]]).sum();
            let s = 2.0 * dot / vtv;
            for i in k..n {
                r[[i, j]] -= s * v[i];
            }
        }
        let dot: f64 = (k..n).map(|i| v[i] * qtb[i]).sum();
        let s = 2.0 * dot / vtv;
        for i in k..n {
            qtb[i] -= s * v[i];
        }
    }

    let mut x = vec![0.0; p];
    for k in (0..p).rev() {
        let tail: f64 = (k + 1..p).map(|j| r[[k, j]] * x[j]).sum();
        x[k] = (qtb[k] - tail) / r[[k, k]];
    }
    Ok(x)
}
