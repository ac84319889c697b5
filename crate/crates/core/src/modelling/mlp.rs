//! Small feed-forward networks on the autodiff tape, trained full-batch with Adam.

use crate::error::{Result, VenomError};
use crate::nn::layers::{declare_affine, AffineParams};
use crate::nn::{adam_step, AdamConfig, AdamState, GradTape, ParamSet, Tensor, Var};
use crate::seed::{derive_seed, rng};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig { hidden: vec![16], epochs: 300, lr: 0.01, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlpTask {
    Regression,
    /// Labels are class indices `0..classes`.
    Classification { classes: usize },
}

impl MlpTask {
    fn outputs(&self) -> usize {
        match self {
            MlpTask::Regression => 1,
            MlpTask::Classification { classes } if *classes <= 2 => 1,
            MlpTask::Classification { classes } => *classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    params: ParamSet,
    layers: usize,
    task: MlpTask,
    y_mean: f64,
    y_std: f64,
    /// Full-batch training loss per epoch.
    pub loss_history: Vec<f64>,
}

fn forward(tape: &mut GradTape, x: Var, layers: usize) -> Result<Var> {
    let mut h = x;
    for i in 0..layers {
        h = AffineParams::bind(tape, &format!("mlp.l{i}"))?.apply(tape, h)?;
        if i + 1 < layers {
            h = tape.gelu(h);
        }
    }
    Ok(h)
}

fn matrix(x: &[Vec<f64>]) -> Result<Tensor> {
    Tensor::from_rows(x)
}

/// Squared loss for regression (on a standardized target), logistic loss for
/// classification. More than two classes train one logit per class.
pub fn mlp_fit(x: &[Vec<f64>], y: &[f64], task: MlpTask, config: &MlpConfig) -> Result<MlpModel> {
    if x.is_empty() || x.len() != y.len() {
        return Err(VenomError::Dimension { op: "mlp_fit", left: vec![x.len()], right: vec![y.len()] });
    }
    if config.hidden.contains(&0) || config.epochs == 0 {
        return Err(VenomError::Config("mlp widths and epochs must be at least 1".into()));
    }
    let inputs = x[0].len();
    let outputs = task.outputs();
    let mut params = ParamSet::new(config.seed);
    let mut r = rng(derive_seed(config.seed, "mlp.init", 0));
    let widths: Vec<usize> = std::iter::once(inputs).chain(config.hidden.iter().copied()).chain([outputs]).collect();
    for (i, w) in widths.windows(2).enumerate() {
        declare_affine(&mut params, &format!("mlp.l{i}"), w[0], w[1], &mut r)?;
    }
    let layers = widths.len() - 1;

    let (y_mean, y_std, target) = match task {
        MlpTask::Regression => {
            let n = y.len() as f64;
            let mean = y.iter().sum::<f64>() / n;
            let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let std = if var > 0.0 { var.sqrt() } else { 1.0 };
            (mean, std, y.iter().map(|v| (v - mean) / std).collect::<Vec<_>>())
        }
        MlpTask::Classification { classes } => {
            if y.iter().any(|v| v.fract() != 0.0 || *v < 0.0 || *v as usize >= classes.max(2)) {
                return Err(VenomError::Contract(format!("labels must be class indices below {classes}")));
            }
            let t = if outputs == 1 {
                y.to_vec()
            } else {
                y.iter().flat_map(|v| (0..outputs).map(move |c| if *v as usize == c { 1.0 } else { 0.0 })).collect()
            };
            (0.0, 1.0, t)
        }
    };

    let input = matrix(x)?;
    let adam = AdamConfig::with_lr(config.lr);
    let mut state = AdamState::new(&params);
    let mut loss_history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let grads = {
            let mut tape = GradTape::new(&params);
            let xv = tape.input(input.clone());
            let out = forward(&mut tape, xv, layers)?;
            let loss = match task {
                MlpTask::Regression => tape.mse(out, &target)?,
                MlpTask::Classification { .. } => tape.bce_logits(out, &target)?,
            };
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(VenomError::Diverged { epoch });
            }
            loss_history.push(value);
            tape.backward(loss)?;
            tape.gradients()
        };
        if !grads.global_norm().is_finite() {
            return Err(VenomError::Diverged { epoch });
        }
        adam_step(&mut params, &grads, &mut state, &adam)?;
    }
    Ok(MlpModel { params, layers, task, y_mean, y_std, loss_history })
}

impl MlpModel {
    fn raw(&self, x: &[Vec<f64>]) -> Result<Tensor> {
        let mut tape = GradTape::new(&self.params);
        let xv = tape.input(matrix(x)?);
        let out = forward(&mut tape, xv, self.layers)?;
        Ok(tape.value(out).clone())
    }

    /// Regression outputs in target units.
    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        if self.task != MlpTask::Regression {
            return Err(VenomError::Contract("predict on a classifier; use predict_class".into()));
        }
        Ok(self.raw(x)?.data().iter().map(|v| v * self.y_std + self.y_mean).collect())
    }

    pub fn predict_class(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        let out = self.raw(x)?;
        match self.task {
            MlpTask::Regression => Err(VenomError::Contract("predict_class on a regressor".into())),
            MlpTask::Classification { .. } if out.cols() == 1 => {
                Ok(out.data().iter().map(|l| if *l >= 0.0 { 1.0 } else { 0.0 }).collect())
            }
            MlpTask::Classification { .. } => Ok((0..out.rows())
                .map(|i| {
                    let row = out.row(i);
                    let mut best = 0;
                    for (c, v) in row.iter().enumerate() {
                        if *v > row[best] {
                            best = c;
                        }
                    }
                    best as f64
                })
                .collect()),
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelling::ols::ols_fit;
    use rand::Rng;

    #[test]
    fn zero_target_regression() {
        let mut r = rng(1);
        let x: Vec<Vec<f64>> = (0..30).map(|_| vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]).collect();
        let m = mlp_fit(&x, &[0.0; 30], MlpTask::Regression, &MlpConfig { epochs: 200, ..Default::default() }).unwrap();
        let pred = m.predict(&x).unwrap();
        let rmse = (pred.iter().map(|p| p * p).sum::<f64>() / 30.0).sqrt();
        assert!(rmse < 0.05, "{rmse}");
    }

    #[test]
    fn xor_is_learned_for_most_seeds() {
        let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let y = vec![0.0, 1.0, 1.0, 0.0];
        let solved = (0..10)
            .filter(|&seed| {
                let c = MlpConfig { hidden: vec![8], epochs: 500, lr: 0.05, seed };
                let m = mlp_fit(&x, &y, MlpTask::Classification { classes: 2 }, &c).unwrap();
                m.predict_class(&x).unwrap() == y
            })
            .count();
        assert!(solved >= 8, "{solved}/10");
    }

    #[test]
    fn linear_network_matches_ols() {
        let mut r = rng(2);
        let x: Vec<Vec<f64>> = (0..50).map(|_| (0..3).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 + 2.0 * v[0] - v[1] + 0.5 * v[2] + r.random_range(-0.2..0.2)).collect();
        let c = MlpConfig { hidden: vec![], epochs: 3000, lr: 0.01, seed: 0 };
        let m = mlp_fit(&x, &y, MlpTask::Regression, &c).unwrap();
        let ols = ols_fit(&x, &y).unwrap();
        for (a, b) in m.predict(&x).unwrap().iter().zip(ols.predict(&x)) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn multiclass_and_determinism() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 3) as f64 * 3.0, 1.0]).collect();
        let y: Vec<f64> = (0..30).map(|i| (i % 3) as f64).collect();
        let c = MlpConfig { hidden: vec![8], epochs: 300, lr: 0.05, seed: 4 };
        let m = mlp_fit(&x, &y, MlpTask::Classification { classes: 3 }, &c).unwrap();
        assert_eq!(m.predict_class(&x).unwrap(), y);
        assert_eq!(m, mlp_fit(&x, &y, MlpTask::Classification { classes: 3 }, &c).unwrap());
    }

    #[test]
    fn divergence_is_reported() {
        let x = vec![vec![1e200], vec![-1e200]];
        let c = MlpConfig { hidden: vec![], epochs: 5, lr: 0.1, seed: 0 };
        let err = mlp_fit(&x, &[1.0, -1.0], MlpTask::Regression, &c);
        assert!(matches!(err, Err(VenomError::Diverged { epoch: 1 })), "{err:?}");
    }
}
