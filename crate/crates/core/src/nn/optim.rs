use super::params::{Gradients, ParamSet};
use super::tensor::Tensor;
use crate::error::{Result, VenomError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Default::default()
        }
    }
}

/// First and second moment estimates, one pair per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        AdamState {
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(
    params: &mut ParamSet,
    grads: &Gradients,
    state: &mut AdamState,
    config: &AdamConfig,
) -> Result<()> {
    if config.lr <= 0.0 {
        return Err(VenomError::Config("learning rate must be positive".into()));
    }
    if grads.len() != params.len() || state.first.len() != params.len() {
        return Err(VenomError::Dimension {
            op: "adam_step",
            left: vec![params.len()],
            right: vec![grads.len(), state.first.len()],
        });
    }
    for (i, (name, g)) in grads.iter().enumerate() {
        let p = params.by_index(i);
        if p.0 != name || p.1.shape() != g.shape() || state.first[i].shape() != g.shape() {
            return Err(VenomError::Dimension {
                op: "adam_step",
                left: p.1.shape().to_vec(),
                right: g.shape().to_vec(),
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - config.beta1.powi(t);
    let c2 = 1.0 - config.beta2.powi(t);
    for (i, (_, g)) in grads.iter().enumerate() {
        let m = state.first[i].data_mut();
        let v = state.second[i].data_mut();
        let p = params.by_index_mut(i).data_mut();
        for j in 0..g.len() {
            let gj = g.data()[j];
            m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * gj;
            v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * gj * gj;
            let mhat = m[j] / c1;
            let vhat = v[j] / c2;
            p[j] -= config.lr * mhat / (vhat.sqrt() + config.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use indexmap::IndexMap;

    fn scalar_set(v: f64) -> ParamSet {
        let mut p = ParamSet::new(0);
        p.insert("x", Tensor::scalar(v)).unwrap();
        p
    }

    fn grad(v: f64) -> Gradients {
        let mut m = IndexMap::new();
        m.insert("x".to_string(), Tensor::scalar(v));
        Gradients::new(m)
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = scalar_set(1.5);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &grad(0.0), &mut s, &AdamConfig::default()).unwrap();
        assert_eq!(p.get("x").unwrap().item(), 1.5);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        let mut p = scalar_set(0.0);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &grad(1.0), &mut s, &AdamConfig::with_lr(0.1)).unwrap();
        let expect = -0.1 * 1.0 / (1.0 + 1e-8);
        assert!((p.get("x").unwrap().item() - expect).abs() < 1e-15);
    }

    #[test]
    fn updates_are_deterministic() {
        let run = || {
            let mut p = scalar_set(0.3);
            let mut s = AdamState::new(&p);
            for _ in 0..2 {
                adam_step(&mut p, &grad(0.7), &mut s, &AdamConfig::default()).unwrap();
            }
            (p, s)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = scalar_set(0.0);
        let mut s = AdamState::new(&p);
        let mut m = IndexMap::new();
        m.insert("x".to_string(), Tensor::vector(vec![1.0, 2.0]).unwrap());
        let g = Gradients::new(m);
        assert!(matches!(
            adam_step(&mut p, &g, &mut s, &AdamConfig::default()),
            Err(VenomError::Dimension { .. })
        ));
    }
}
