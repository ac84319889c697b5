//! Principal components by power iteration with deflation.

use crate::error::{Result, VenomError};

const MAX_ITERS: usize = 10_000;
const TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// One row of `dims` coordinates per input vector.
    pub coords: Vec<Vec<f64>>,
    /// Orthonormal principal directions, strongest first.
    pub directions: Vec<Vec<f64>>,
    /// Variance captured by each direction.
    pub variances: Vec<f64>,
    pub mean: Vec<f64>,
    /// Set when every input vector is identical.
    pub degenerate: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let d = dot(v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
    }
}

/// Unit vector orthogonal to `basis`, built from the coordinate axis with the largest residual.
fn complement(k: usize, basis: &[Vec<f64>]) -> Vec<f64> {
    (0..k)
        .map(|axis| {
            let mut v = vec![0.0; k];
            v[axis] = 1.0;
            orthogonalize(&mut v, basis);
            v
        })
        .max_by(|a, b| dot(a, a).total_cmp(&dot(b, b)))
        .map(|mut v| {
            normalize(&mut v);
            v
        })
        .expect("k >= 1")
}

/// Project centred vectors onto their top `dims` principal directions.
pub fn pca_project(vectors: &[Vec<f64>], dims: usize) -> Result<Projection> {
    let n = vectors.len();
    let k = vectors.first().map_or(0, Vec::len);
    if dims == 0 || n < dims || dims >= k {
        return Err(VenomError::Contract(format!("cannot project {n} vectors of width {k} to {dims} dimensions")));
    }
    if vectors.iter().any(|v| v.len() != k) {
        return Err(VenomError::Contract("vectors of unequal width".into()));
    }
    let mean: Vec<f64> = (0..k).map(|j| vectors.iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
    let centred: Vec<Vec<f64>> = vectors.iter().map(|v| v.iter().zip(&mean).map(|(a, m)| a - m).collect()).collect();
    let mut cov = vec![vec![0.0; k]; k];
    for v in &centred {
        for i in 0..k {
            for j in 0..k {
                cov[i][j] += v[i] * v[j] / n as f64;
            }
        }
    }
    let total: f64 = (0..k).map(|i| cov[i][i]).sum();
    let degenerate = !(total > 0.0);
    let apply = |v: &[f64]| -> Vec<f64> { cov.iter().map(|row| dot(row, v)).collect() };

    let mut directions: Vec<Vec<f64>> = Vec::with_capacity(dims);
    let mut variances = Vec::with_capacity(dims);
    for _ in 0..dims {
        let mut v = complement(k, &directions);
        // Start from the data so the iteration does not stall on a null axis.
        if let Some(seed) = centred.iter().max_by(|a, b| dot(a, a).total_cmp(&dot(b, b))) {
            let mut s = seed.clone();
            orthogonalize(&mut s, &directions);
            if normalize(&mut s) > 0.0 {
                v = s;
            }
        }
        for _ in 0..MAX_ITERS {
            let mut w = apply(&v);
            orthogonalize(&mut w, &directions);
            let norm = normalize(&mut w);
            if norm <= total * 1e-15 || norm == 0.0 {
                break;
            }
            let change = v.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = w;
            if change < TOL {
                break;
            }
        }
        orthogonalize(&mut v, &directions);
        normalize(&mut v);
        // Sign convention: largest-magnitude component positive.
        let pivot = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(1.0);
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        variances.push(if degenerate { 0.0 } else { dot(&v, &apply(&v)) });
        directions.push(v);
    }
    let coords = centred.iter().map(|c| directions.iter().map(|d| dot(c, d)).collect()).collect();
    Ok(Projection { coords, directions, variances, mean, degenerate })
}

impl Projection {
    /// Mean squared distance between the inputs and their reconstruction.
    pub fn reconstruction_error(&self, vectors: &[Vec<f64>]) -> f64 {
        let n = vectors.len().max(1) as f64;
        vectors
            .iter()
            .zip(&self.coords)
            .map(|(v, c)| {
                let mut r = self.mean.clone();
                for (d, a) in self.directions.iter().zip(c) {
                    r.iter_mut().zip(d).for_each(|(x, y)| *x += a * y);
                }
                v.iter().zip(&r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            })
            .sum::<f64>()
            / n
    }
}
