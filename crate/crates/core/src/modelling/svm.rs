//! Linear soft-margin SVM trained by stochastic subgradient descent.

use rand::seq::SliceRandom;

use crate::error::{Result, VenomError};
use crate::seed::{derive_seed, rng};

#[derive(Debug, Clone, PartialEq)]
pub struct SvmConfig {
    pub epochs: usize,
    pub lr: f64,
    pub reg: f64,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig { epochs: 200, lr: 0.01, reg: 1e-4, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub w: Vec<f64>,
    pub b: f64,
    /// Regularized hinge objective after each epoch.
    pub objective: Vec<f64>,
}

impl SvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.b + self.w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn classify(&self, x: &[f64]) -> f64 {
        if self.decision(x) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

pub fn hinge_objective(w: &[f64], b: f64, x: &[Vec<f64>], y: &[f64], reg: f64) -> f64 {
    let hinge: f64 = x
        .iter()
        .zip(y)
        .map(|(row, t)| {
            let f = b + w.iter().zip(row).map(|(a, v)| a * v).sum::<f64>();
            (1.0 - t * f).max(0.0)
        })
        .sum::<f64>()
        / x.len() as f64;
    0.5 * reg * w.iter().map(|v| v * v).sum::<f64>() + hinge
}

/// Labels must be -1 or +1 with both present. Step size decays as
/// `lr / (1 + epoch)`; the L2 term is applied as a proximal shrink so large
/// `reg` stays stable.
pub fn svm_sgd_fit(x: &[Vec<f64>], y: &[f64], config: &SvmConfig) -> Result<SvmModel> {
    if x.is_empty() || x.len() != y.len() {
        return Err(VenomError::Dimension { op: "svm_sgd_fit", left: vec![x.len()], right: vec![y.len()] });
    }
    if y.iter().any(|t| *t != 1.0 && *t != -1.0) {
        return Err(VenomError::Contract("svm labels must be -1 or +1".into()));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(VenomError::Contract("svm training needs both classes".into()));
    }
    if !(config.lr > 0.0) || config.reg < 0.0 || config.epochs == 0 {
        return Err(VenomError::Config("svm needs lr > 0, reg >= 0 and epochs >= 1".into()));
    }
    let p = x[0].len();
    let mut w = vec![0.0; p];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut objective = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut r = rng(derive_seed(config.seed, "svm.shuffle", epoch as u64));
        order.shuffle(&mut r);
        let eta = config.lr / (1.0 + epoch as f64);
        let shrink = 1.0 / (1.0 + eta * config.reg);
        for &i in &order {
            let f = b + w.iter().zip(&x[i]).map(|(a, v)| a * v).sum::<f64>();
            if y[i] * f < 1.0 {
                for (wj, xj) in w.iter_mut().zip(&x[i]) {
                    *wj += eta * y[i] * xj;
                }
                b += eta * y[i];
            }
            for wj in &mut w {
                *wj *= shrink;
            }
        }
        objective.push(hinge_objective(&w, b, x, y, config.reg));
    }
    if w.iter().any(|v| !v.is_finite()) || !b.is_finite() {
        return Err(VenomError::NonFinite("svm weights".into()));
    }
    Ok(SvmModel { w, b, objective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn separable_line() {
        let x = vec![vec![-1.0], vec![1.0], vec![-2.0], vec![2.0]];
        let y = vec![-1.0, 1.0, -1.0, 1.0];
        let m = svm_sgd_fit(&x, &y, &SvmConfig { lr: 0.5, ..Default::default() }).unwrap();
        for (row, t) in x.iter().zip(&y) {
            assert_eq!(m.classify(row), *t);
        }
    }

    #[test]
    fn heavy_regularization_shrinks_weights() {
        let x = vec![vec![-1.0, 0.5], vec![1.0, -0.5], vec![-2.0, 1.0], vec![2.0, 0.0]];
        let y = vec![-1.0, 1.0, -1.0, 1.0];
        let light = svm_sgd_fit(&x, &y, &SvmConfig { reg: 1e-4, ..Default::default() }).unwrap();
        let heavy = svm_sgd_fit(&x, &y, &SvmConfig { reg: 1e6, ..Default::default() }).unwrap();
        let norm = |w: &[f64]| w.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm(&heavy.w) < 1e-4);
        assert!(norm(&heavy.w) < 1e-3 * norm(&light.w));
    }

    #[test]
    fn objective_does_not_increase() {
        let mut r = rng(5);
        let x: Vec<Vec<f64>> = (0..40).map(|_| vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]).collect();
        let y: Vec<f64> = x.iter().map(|v| if v[0] + 0.3 * v[1] + r.random_range(-0.4..0.4) > 0.0 { 1.0 } else { -1.0 }).collect();
        let m = svm_sgd_fit(&x, &y, &SvmConfig { epochs: 100, lr: 0.05, reg: 1e-2, seed: 3 }).unwrap();
        let window = 10;
        let averages: Vec<f64> =
            m.objective.chunks(window).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        for pair in averages.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "{averages:?}");
        }
        assert!(m.objective.last().unwrap() < &1.0);
    }

    #[test]
    fn single_class_is_rejected() {
        let err = svm_sgd_fit(&[vec![1.0], vec![2.0]], &[1.0, 1.0], &SvmConfig::default());
        assert!(matches!(err, Err(VenomError::Contract(_))));
    }

    #[test]
    fn seeded_runs_repeat() {
        let x = vec![vec![-1.0, 2.0], vec![1.0, 0.1], vec![-0.5, 0.3], vec![0.7, -1.0]];
        let y = vec![-1.0, 1.0, -1.0, 1.0];
        let c = SvmConfig { seed: 9, ..Default::default() };
        assert_eq!(svm_sgd_fit(&x, &y, &c).unwrap(), svm_sgd_fit(&x, &y, &c).unwrap());
    }
}
