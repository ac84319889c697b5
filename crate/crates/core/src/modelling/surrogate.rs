//! Regressors from embeddings to operator outputs.

use std::fmt;

use super::mlp::{mlp_fit, MlpConfig, MlpModel, MlpTask};
use super::ols::{min_norm_fit, ols_fit, LinearFit};
use crate::error::{Result, VenomError};
use crate::vectorizer::Embedding;

pub const DEFAULT_AUTO_THRESHOLD: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurrogateKind {
    Linear,
    Mlp,
    /// Linear up to the threshold number of pairs, MLP above it.
    Auto,
}

impl SurrogateKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear" => Some(SurrogateKind::Linear),
            "mlp" => Some(SurrogateKind::Mlp),
            "auto" => Some(SurrogateKind::Auto),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SurrogateKind::Linear => "linear",
            SurrogateKind::Mlp => "mlp",
            SurrogateKind::Auto => "auto",
        }
    }
}

impl fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    pub auto_threshold: usize,
    pub mlp: MlpConfig,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        SurrogateSpec {
            kind: SurrogateKind::Auto,
            auto_threshold: DEFAULT_AUTO_THRESHOLD,
            mlp: MlpConfig { hidden: vec![16], epochs: 300, lr: 0.01, seed: 0 },
        }
    }
}

impl SurrogateSpec {
    pub fn linear() -> Self {
        SurrogateSpec { kind: SurrogateKind::Linear, ..Default::default() }
    }

    /// The concrete kind used for `pairs` training pairs.
    pub fn resolve(&self, pairs: usize) -> SurrogateKind {
        match self.kind {
            SurrogateKind::Auto if pairs <= self.auto_threshold => SurrogateKind::Linear,
            SurrogateKind::Auto => SurrogateKind::Mlp,
            k => k,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SurrogateFit {
    Linear(LinearFit),
    Mlp(MlpModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    pub fit: SurrogateFit,
    pub k: usize,
    /// Dataset ids of the training pairs.
    pub train_ids: Vec<String>,
    pub operator_hash: String,
}

/// Fit an embedding-to-output regressor. Linear fits fall back to the
/// minimum-norm solution when there are fewer than `k + 1` pairs or the
/// normal equations are singular.
pub fn build_surrogate(pairs: &[(Embedding, f64)], spec: &SurrogateSpec, operator_hash: &str) -> Result<SurrogateModel> {
    if pairs.len() < 2 {
        return Err(VenomError::InsufficientData(format!("surrogate needs 2 or more pairs, got {}", pairs.len())));
    }
    let k = pairs[0].0.z.len();
    if let Some((e, _)) = pairs.iter().find(|(e, _)| e.z.len() != k) {
        return Err(VenomError::Dimension { op: "build_surrogate", left: vec![k], right: vec![e.z.len()] });
    }
    if pairs.iter().any(|(_, y)| !y.is_finite()) {
        return Err(VenomError::NonFinite("surrogate target".into()));
    }
    let x: Vec<Vec<f64>> = pairs.iter().map(|(e, _)| e.z.clone()).collect();
    let y: Vec<f64> = pairs.iter().map(|(_, y)| *y).collect();
    let fit = match spec.resolve(pairs.len()) {
        SurrogateKind::Mlp => SurrogateFit::Mlp(mlp_fit(&x, &y, MlpTask::Regression, &spec.mlp)?),
        _ if pairs.len() < k + 1 => SurrogateFit::Linear(min_norm_fit(&x, &y)?),
        _ => SurrogateFit::Linear(match ols_fit(&x, &y) {
            Err(VenomError::Singular) => min_norm_fit(&x, &y)?,
            other => other?,
        }),
    };
    Ok(SurrogateModel {
        fit,
        k,
        train_ids: pairs.iter().map(|(e, _)| e.dataset_id.clone()).collect(),
        operator_hash: operator_hash.to_string(),
    })
}

impl SurrogateModel {
    pub fn kind(&self) -> SurrogateKind {
        match self.fit {
            SurrogateFit::Linear(_) => SurrogateKind::Linear,
            SurrogateFit::Mlp(_) => SurrogateKind::Mlp,
        }
    }

    pub fn predict(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.k {
            return Err(VenomError::Contract(format!("surrogate expects k={}, got {}", self.k, z.len())));
        }
        let y = match &self.fit {
            SurrogateFit::Linear(f) => f.predict_one(z),
            SurrogateFit::Mlp(m) => m.predict(&[z.to_vec()])?[0],
        };
        if !y.is_finite() {
            return Err(VenomError::NonFinite("surrogate prediction".into()));
        }
        Ok(y)
    }

    /// Multiply-add estimate of fitting plus one prediction, used by the work clock.
    pub fn work(spec: &SurrogateSpec, pairs: usize, k: usize) -> f64 {
        let n = pairs as f64;
        let p = k as f64 + 1.0;
        match spec.resolve(pairs) {
            SurrogateKind::Mlp => {
                let mut widths = vec![k as f64];
                widths.extend(spec.mlp.hidden.iter().map(|h| *h as f64));
                widths.push(1.0);
                3.0 * spec.mlp.epochs as f64 * n * widths.windows(2).map(|w| w[0] * w[1]).sum::<f64>()
            }
            _ => n * p * p + p * p * p,
        }
    }
}
