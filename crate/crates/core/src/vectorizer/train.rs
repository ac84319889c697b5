use rand::seq::SliceRandom;

use super::config::VectorizerConfig;
use super::model::{elbo_on_tape, standard_normal, tokenize, Tokens, VectorizerModel};
use crate::error::{Result, VenomError};
use crate::lake::DatasetRecord;
use crate::nn::{adam_step, AdamConfig, AdamState, GradTape};
use crate::seed::{derive_seed, rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    pub mean_loss: f64,
    pub mean_kl: f64,
    pub mean_recon: f64,
}

pub fn train(corpus: &[DatasetRecord], config: &VectorizerConfig) -> Result<(VectorizerModel, Vec<EpochStats>)> {
    let tokens = corpus
        .iter()
        .map(|d| tokenize(d, config))
        .collect::<Result<Vec<_>>>()?;
    train_tokens(&tokens, config)
}

pub fn train_tokens(corpus: &[Tokens], config: &VectorizerConfig) -> Result<(VectorizerModel, Vec<EpochStats>)> {
    if corpus.is_empty() {
        return Err(VenomError::EmptyInput("training corpus is empty".into()));
    }
    let mut model = VectorizerModel::init(config.clone())?;
    let mut params = model.params().clone();
    let mut state = AdamState::new(&params);
    let adam = AdamConfig::with_lr(config.lr);
    let mut trace = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..corpus.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng(derive_seed(config.seed, "vectorizer.shuffle", epoch as u64)));
        let mut noise = rng(derive_seed(config.seed, "vectorizer.eps", epoch as u64));
        let (mut loss_sum, mut kl_sum, mut recon_sum) = (0.0, 0.0, 0.0);

        for batch in order.chunks(config.batch_size) {
            let grads = {
                let mut tape = GradTape::new(&params);
                let mut total = None;
                for &i in batch {
                    let eps = standard_normal(&mut noise, config.k);
                    let v = elbo_on_tape(&mut tape, config, &corpus[i], &eps)?;
                    let loss = tape.value(v.loss).item();
                    if !loss.is_finite() {
                        return Err(VenomError::Diverged { epoch });
                    }
                    loss_sum += loss;
                    kl_sum += tape.value(v.kl).item();
                    recon_sum += tape.value(v.recon).item();
                    total = Some(match total {
                        None => v.loss,
                        Some(t) => tape.add(t, v.loss)?,
                    });
                }
                let total = total.expect("batches are non-empty");
                let mean = tape.scale(total, 1.0 / batch.len() as f64);
                tape.backward(mean)?;
                tape.gradients()
            };
            if !grads.global_norm().is_finite() {
                return Err(VenomError::Diverged { epoch });
            }
            adam_step(&mut params, &grads, &mut state, &adam)?;
        }

        let n = corpus.len() as f64;
        let stats = EpochStats {
            epoch,
            mean_loss: loss_sum / n,
            mean_kl: kl_sum / n,
            mean_recon: recon_sum / n,
        };
        log::debug!("epoch={} mean_loss={}", epoch, stats.mean_loss);
        trace.push(stats);
    }
    model.replace_params(params);
    Ok((model, trace))
}

/// Loss trace as CSV with header `epoch,mean_loss,mean_kl,mean_recon`.
pub fn trace_csv(trace: &[EpochStats]) -> String {
    let mut out = String::from("epoch,mean_loss,mean_kl,mean_recon\n");
    for s in trace {
        out.push_str(&format!("{},{},{},{}\n", s.epoch, s.mean_loss, s.mean_kl, s.mean_recon));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;
    use crate::vectorizer::model::tokenize_values;

    fn config() -> VectorizerConfig {
        VectorizerConfig {
            k: 4,
            n_layers: 1,
            n_heads: 2,
            d_model: 8,
            ffn_width: 16,
            max_rows: 8,
            max_cols: 3,
            epochs: 1,
            batch_size: 3,
            seed: 1,
            kl_weight: 1.0,
            lr: 1e-2,
        }
    }

    fn corpus(c: &VectorizerConfig) -> Vec<Tokens> {
        (0..5)
            .map(|i| {
                let data = (0..12).map(|j| ((i * 12 + j) as f64 * 0.37).sin() + i as f64 * 0.2).collect();
                tokenize_values(&Tensor::matrix(4, 3, data).unwrap(), c).unwrap()
            })
            .collect()
    }

    #[test]
    fn one_epoch_gives_one_trace_entry() {
        let c = config();
        let (_, trace) = train_tokens(&corpus(&c), &c).unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(trace[0].epoch, 1);
        let csv = trace_csv(&trace);
        assert!(csv.starts_with("epoch,mean_loss,mean_kl,mean_recon\n1,"));
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let c = VectorizerConfig { epochs: 3, ..config() };
        let a = train_tokens(&corpus(&c), &c).unwrap();
        let b = train_tokens(&corpus(&c), &c).unwrap();
        assert_eq!(a.0.params(), b.0.params());
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn training_changes_parameters_and_version() {
        let c = VectorizerConfig { epochs: 2, ..config() };
        let (m, _) = train_tokens(&corpus(&c), &c).unwrap();
        assert_ne!(m.version(), VectorizerModel::init(c).unwrap().version());
    }

    #[test]
    fn overflowing_loss_reports_divergence_epoch() {
        let c = config();
        let mut data = corpus(&c);
        let huge = Tensor::matrix(2, 3, vec![1e200; 6]).unwrap();
        data.push(tokenize_values(&huge, &c).unwrap());
        assert!(matches!(train_tokens(&data, &c), Err(VenomError::Diverged { epoch: 1 })));
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(matches!(train_tokens(&[], &config()), Err(VenomError::EmptyInput(_))));
    }
}
