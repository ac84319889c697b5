//! Least squares with an intercept.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, VenomError};

const JITTER: f64 = 1e-10;
/// Smallest accepted squared Cholesky pivot relative to the largest diagonal.
const PIVOT_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub coef: Vec<f64>,
}

impl LinearFit {
    pub fn predict_one(&self, x: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter().map(|row| self.predict_one(row)).collect()
    }
}

fn design(x: &[Vec<f64>], y: &[f64]) -> Result<DMatrix<f64>> {
    if x.is_empty() || x.len() != y.len() {
        return Err(VenomError::Dimension {
            op: "least squares",
            left: vec![x.len()],
            right: vec![y.len()],
        });
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p) {
        return Err(VenomError::Contract("ragged design matrix".into()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(VenomError::NonFinite("least-squares input".into()));
    }
    Ok(DMatrix::from_fn(x.len(), p + 1, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] }))
}

fn to_fit(w: &DVector<f64>) -> LinearFit {
    LinearFit { intercept: w[0], coef: w.iter().skip(1).copied().collect() }
}

/// Ordinary least squares through the normal equations, with a tiny ridge
/// jitter and one step of iterative refinement.
pub fn ols_fit(x: &[Vec<f64>], y: &[f64]) -> Result<LinearFit> {
    let a = design(x, y)?;
    let (n, p) = a.shape();
    if n < p {
        return Err(VenomError::Contract(format!("{n} rows cannot determine {p} coefficients")));
    }
    let b = DVector::from_column_slice(y);
    let gram = a.transpose() * &a;
    let scale = gram.diagonal().max().max(1.0);
    let mut jittered = gram.clone();
    for i in 0..p {
        jittered[(i, i)] += JITTER * scale;
    }
    let chol = jittered.cholesky().ok_or(VenomError::Singular)?;
    let min_pivot = chol.l_dirty().diagonal().iter().map(|v| v * v).fold(f64::INFINITY, f64::min);
    if min_pivot < PIVOT_FLOOR * scale {
        return Err(VenomError::Singular);
    }
    let mut w = chol.solve(&(a.transpose() * &b));
    let residual = &b - &a * &w;
    w += chol.solve(&(a.transpose() * residual));
    if w.iter().any(|v| !v.is_finite()) {
        return Err(VenomError::Singular);
    }
    Ok(to_fit(&w))
}

/// Least squares with the minimum-norm coefficient vector, for rank-deficient
/// and under-determined systems. The intercept is not penalized: coefficients
/// are solved on centred data through the SVD.
pub fn min_norm_fit(x: &[Vec<f64>], y: &[f64]) -> Result<LinearFit> {
    design(x, y)?;
    let n = x.len();
    let p = x[0].len();
    let x_mean: Vec<f64> = (0..p).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    if p == 0 {
        return Ok(LinearFit { intercept: y_mean, coef: Vec::new() });
    }
    let a = DMatrix::from_fn(n, p, |i, j| x[i][j] - x_mean[j]);
    let b = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let size = n.max(p) as f64;
    let svd = a.svd(true, true);
    let tol = svd.singular_values.max() * 1e-12 * size;
    let w = svd.solve(&b, tol).map_err(|e| VenomError::Internal(e.to_string()))?;
    let coef: Vec<f64> = w.iter().copied().collect();
    let intercept = y_mean - coef.iter().zip(&x_mean).map(|(c, m)| c * m).sum::<f64>();
    Ok(LinearFit { intercept, coef })
}
