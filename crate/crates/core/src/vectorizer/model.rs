use rand_distr::{Distribution, StandardNormal};

use super::config::VectorizerConfig;
use crate::error::{Result, VenomError};
use crate::lake::DatasetRecord;
use crate::nn::layers::{self, AffineParams, BlockParams, DEFAULT_LN_EPS};
use crate::nn::{GradTape, ParamSet, Tensor, Var};
use crate::seed::{content_hash, derive_seed, rng, Rng};

/// Mean and log-variance of the diagonal Gaussian posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentStats {
    pub mu: Vec<f64>,
    pub logvar: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub dataset_id: String,
    pub z: Vec<f64>,
    pub model_version: String,
}

/// One dataset prepared for the encoder: one token per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Tokens {
    /// `r × (max_cols + 2)`: zero-padded row values, then the column and row hints.
    pub features: Tensor,
    /// `r × max_cols`: zero-padded row values.
    pub targets: Tensor,
    pub mask: Vec<bool>,
    /// Real (unpadded) column count.
    pub cols: usize,
    /// Original row count when rows were dropped.
    pub truncated_from: Option<usize>,
}

impl Tokens {
    pub fn rows(&self) -> usize {
        self.mask.len()
    }

    fn real_rows(&self) -> Vec<usize> {
        self.mask.iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| i).collect()
    }
}

pub fn tokenize(dataset: &DatasetRecord, config: &VectorizerConfig) -> Result<Tokens> {
    tokenize_values(dataset.values(), config)
}

pub fn tokenize_values(values: &Tensor, config: &VectorizerConfig) -> Result<Tokens> {
    if values.is_empty() || values.shape().contains(&0) {
        return Err(VenomError::EmptyInput("dataset has no cells".into()));
    }
    let (m, n) = values.dims();
    if n > config.max_cols {
        return Err(VenomError::UnsupportedWidth { cols: n, max: config.max_cols });
    }
    let r = m.min(config.max_rows);
    let truncated_from = if m > r {
        log::warn!("dataset with {m} rows truncated to {r}");
        Some(m)
    } else {
        None
    };
    let width = config.max_cols + 2;
    let col_hint = n as f64 / config.max_cols as f64;
    let row_hint = r as f64 / config.max_rows as f64;
    let mut features = vec![0.0; r * width];
    let mut targets = vec![0.0; r * config.max_cols];
    for i in 0..r {
        let row = values.row(i);
        features[i * width..i * width + n].copy_from_slice(row);
        features[i * width + config.max_cols] = col_hint;
        features[i * width + config.max_cols + 1] = row_hint;
        targets[i * config.max_cols..i * config.max_cols + n].copy_from_slice(row);
    }
    Ok(Tokens {
        features: Tensor::matrix(r, width, features)?,
        targets: Tensor::matrix(r, config.max_cols, targets)?,
        mask: vec![true; r],
        cols: n,
        truncated_from,
    })
}

/// Encoder and decoder parameters, stored in one set under `enc.` and `dec.` prefixes.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorizerModel {
    config: VectorizerConfig,
    params: ParamSet,
    version: String,
}

fn model_version(config: &VectorizerConfig, params: &ParamSet) -> String {
    let mut chunks: Vec<Vec<u8>> = vec![config.to_text().into_bytes()];
    for (name, t) in params.iter() {
        chunks.push(name.as_bytes().to_vec());
        chunks.push(t.data().iter().flat_map(|v| v.to_le_bytes()).collect());
    }
    content_hash(chunks.iter().map(Vec::as_slice))
}

fn declare(config: &VectorizerConfig) -> Result<ParamSet> {
    config.validate()?;
    let seed = derive_seed(config.seed, "vectorizer.init", 0);
    let mut r = rng(seed);
    let mut p = ParamSet::new(seed);
    let d = config.d_model;
    layers::declare_affine(&mut p, "enc.embed", config.max_cols + 2, d, &mut r)?;
    for i in 0..config.n_layers {
        layers::declare_block(&mut p, &format!("enc.block{i}"), d, config.ffn_width, &mut r)?;
    }
    layers::declare_affine(&mut p, "enc.mu", d, config.k, &mut r)?;
    layers::declare_affine(&mut p, "enc.logvar", d, config.k, &mut r)?;
    layers::declare_affine(&mut p, "dec.lift", config.k, d, &mut r)?;
    p.insert_xavier("dec.pos", config.max_rows, d, &mut r)?;
    for i in 0..config.n_layers {
        layers::declare_block(&mut p, &format!("dec.block{i}"), d, config.ffn_width, &mut r)?;
    }
    layers::declare_affine(&mut p, "dec.out", d, config.max_cols, &mut r)?;
    Ok(p)
}

impl VectorizerModel {
    /// Fresh model initialized from `config.seed`.
    pub fn init(config: VectorizerConfig) -> Result<Self> {
        let params = declare(&config)?;
        let version = model_version(&config, &params);
        Ok(VectorizerModel { config, params, version })
    }

    /// Wrap existing parameters, checking they match the layout `config` declares.
    pub fn from_parts(config: VectorizerConfig, mut params: ParamSet) -> Result<Self> {
        let layout = declare(&config)?;
        params.set_seed(layout.seed());
        if layout.len() != params.len() {
            return Err(VenomError::Schema(format!(
                "expected {} parameters, found {}",
                layout.len(),
                params.len()
            )));
        }
        for (name, t) in layout.iter() {
            match params.get(name) {
                Some(p) if p.shape() == t.shape() => {}
                Some(p) => {
                    return Err(VenomError::Dimension {
                        op: "vectorizer parameters",
                        left: t.shape().to_vec(),
                        right: p.shape().to_vec(),
                    })
                }
                None => return Err(VenomError::Schema(format!("missing parameter {name}"))),
            }
        }
        let version = model_version(&config, &params);
        Ok(VectorizerModel { config, params, version })
    }

    pub fn config(&self) -> &VectorizerConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    /// Edit parameters in place; the version is recomputed afterwards.
    pub fn update_params(&mut self, f: impl FnOnce(&mut ParamSet)) {
        f(&mut self.params);
        self.version = model_version(&self.config, &self.params);
    }

    pub(crate) fn replace_params(&mut self, params: ParamSet) {
        self.params = params;
        self.version = model_version(&self.config, &self.params);
    }

    pub fn encode(&self, dataset: &DatasetRecord) -> Result<LatentStats> {
        self.encode_tokens(&tokenize(dataset, &self.config)?)
    }

    pub fn encode_tokens(&self, tokens: &Tokens) -> Result<LatentStats> {
        let mut tape = GradTape::new(&self.params);
        let (mu, lv) = encode_on_tape(&mut tape, &self.config, tokens)?;
        let stats = LatentStats {
            mu: tape.value(mu).data().to_vec(),
            logvar: tape.value(lv).data().to_vec(),
        };
        if stats.mu.iter().chain(&stats.logvar).any(|v| !v.is_finite()) {
            return Err(VenomError::NonFinite("encoder output".into()));
        }
        Ok(stats)
    }

    /// Reconstruct `row_count × max_cols` values from a latent vector.
    pub fn decode(&self, z: &[f64], row_count: usize) -> Result<Tensor> {
        if z.len() != self.config.k {
            return Err(VenomError::Dimension {
                op: "decode",
                left: vec![z.len()],
                right: vec![self.config.k],
            });
        }
        let mut tape = GradTape::new(&self.params);
        let zv = tape.input(Tensor::matrix(1, z.len(), z.to_vec())?);
        let out = decode_on_tape(&mut tape, &self.config, zv, row_count)?;
        Ok(tape.value(out).clone())
    }

    /// Deterministic embedding: the posterior mean.
    pub fn vectorize(&self, dataset: &DatasetRecord) -> Result<Embedding> {
        let stats = self.encode(dataset)?;
        Ok(Embedding {
            dataset_id: dataset.id.clone(),
            z: stats.mu,
            model_version: self.version.clone(),
        })
    }

    /// Rough multiply-add count of one encoder pass, used by the work clock.
    pub fn encode_work(&self, rows: usize) -> f64 {
        let c = &self.config;
        let r = rows.min(c.max_rows) as f64;
        let d = c.d_model as f64;
        let block = r * d * d * 4.0 + 2.0 * r * r * d + 2.0 * r * d * c.ffn_width as f64;
        r * (c.max_cols as f64 + 2.0) * d + c.n_layers as f64 * block + 2.0 * d * c.k as f64
    }
}

/// Encoder forward pass on a tape; returns `1 × k` mean and log-variance.
pub fn encode_on_tape(
    tape: &mut GradTape,
    config: &VectorizerConfig,
    tokens: &Tokens,
) -> Result<(Var, Var)> {
    let x = tape.input(tokens.features.clone());
    let embed = AffineParams::bind(tape, "enc.embed")?;
    let mut h = embed.apply(tape, x)?;
    for i in 0..config.n_layers {
        let block = BlockParams::bind(tape, &format!("enc.block{i}"))?;
        h = layers::pre_ln_block(tape, h, &block, config.n_heads, DEFAULT_LN_EPS)?;
    }
    let pooled = tape.mean_rows(h, &tokens.real_rows())?;
    let mu = AffineParams::bind(tape, "enc.mu")?.apply(tape, pooled)?;
    let lv = AffineParams::bind(tape, "enc.logvar")?.apply(tape, pooled)?;
    Ok((mu, lv))
}

/// Decoder forward pass on a tape; `z` is `1 × k`.
pub fn decode_on_tape(
    tape: &mut GradTape,
    config: &VectorizerConfig,
    z: Var,
    row_count: usize,
) -> Result<Var> {
    if row_count == 0 || row_count > config.max_rows {
        return Err(VenomError::Contract(format!(
            "row_count {row_count} outside 1..={}",
            config.max_rows
        )));
    }
    let lift = AffineParams::bind(tape, "dec.lift")?;
    let lifted = lift.apply(tape, z)?;
    let spread = tape.broadcast_rows(lifted, row_count)?;
    let pos = tape.param("dec.pos")?;
    let pos = tape.slice_rows(pos, 0, row_count)?;
    let mut h = tape.add(spread, pos)?;
    for i in 0..config.n_layers {
        let block = BlockParams::bind(tape, &format!("dec.block{i}"))?;
        h = layers::pre_ln_block(tape, h, &block, config.n_heads, DEFAULT_LN_EPS)?;
    }
    AffineParams::bind(tape, "dec.out")?.apply(tape, h)
}

/// `0.5 * sum(exp(lv) + mu^2 - 1 - lv)` on a tape.
pub fn kl_on_tape(tape: &mut GradTape, mu: Var, logvar: Var) -> Result<Var> {
    let var = tape.exp(logvar);
    let mu2 = tape.mul(mu, mu)?;
    let s = tape.add(var, mu2)?;
    let s = tape.sub(s, logvar)?;
    let s = tape.offset(s, -1.0);
    let total = tape.sum(s);
    Ok(tape.scale(total, 0.5))
}

#[derive(Debug, Clone, Copy)]
pub struct ElboVars {
    pub loss: Var,
    pub recon: Var,
    pub kl: Var,
}

/// Negative ELBO for one dataset with a fixed standard-normal draw `eps`.
pub fn elbo_on_tape(
    tape: &mut GradTape,
    config: &VectorizerConfig,
    tokens: &Tokens,
    eps: &[f64],
) -> Result<ElboVars> {
    let (mu, lv) = encode_on_tape(tape, config, tokens)?;
    let noise = tape.input(Tensor::matrix(1, eps.len(), eps.to_vec())?);
    let half = tape.scale(lv, 0.5);
    let std = tape.exp(half);
    let spread = tape.mul(std, noise)?;
    let z = tape.add(mu, spread)?;
    let recon_x = decode_on_tape(tape, config, z, tokens.rows())?;
    let recon = tape.half_mse(recon_x, tokens.targets.clone(), tokens.cols)?;
    let kl = kl_on_tape(tape, mu, lv)?;
    let weighted = tape.scale(kl, config.kl_weight);
    let loss = tape.add(recon, weighted)?;
    Ok(ElboVars { loss, recon, kl })
}

pub fn standard_normal(r: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(r)).collect()
}

/// `z = mu + exp(logvar / 2) * eps` with `eps` drawn from `seed`.
pub fn reparameterize(stats: &LatentStats, seed: u64) -> Vec<f64> {
    reparameterize_with(stats, &mut rng(seed))
}

pub fn reparameterize_with(stats: &LatentStats, r: &mut Rng) -> Vec<f64> {
    let eps = standard_normal(r, stats.mu.len());
    stats
        .mu
        .iter()
        .zip(&stats.logvar)
        .zip(eps)
        .map(|((m, lv), e)| m + (lv / 2.0).exp() * e)
        .collect()
}

/// KL divergence of `N(mu, diag(exp(logvar)))` from the standard normal.
pub fn kl_term(stats: &LatentStats) -> f64 {
    0.5 * stats
        .mu
        .iter()
        .zip(&stats.logvar)
        .map(|(m, lv)| lv.exp() + m * m - 1.0 - lv)
        .sum::<f64>()
}

/// `0.5 * MSE` over the first `cols` columns plus `kl_weight * KL`.
pub fn elbo_loss(
    x: &Tensor,
    x_hat: &Tensor,
    cols: usize,
    stats: &LatentStats,
    kl_weight: f64,
) -> Result<f64> {
    let (r, c) = x.dims();
    if x_hat.dims() != (r, c) || cols == 0 || cols > c {
        return Err(VenomError::Contract(format!(
            "reconstruction shape {:?} does not match target {:?}",
            x_hat.shape(),
            x.shape()
        )));
    }
    let mut s = 0.0;
    for i in 0..r {
        for j in 0..cols {
            let d = x.get(i, j) - x_hat.get(i, j);
            s += d * d;
        }
    }
    Ok(0.5 * s / (r * cols) as f64 + kl_weight * kl_term(stats))
}
