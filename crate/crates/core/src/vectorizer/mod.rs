//! Dataset-to-vector model: a pre-LN transformer encoder over row tokens with
//! a Gaussian latent bottleneck, trained against a mirrored decoder.

pub mod checkpoint;
pub mod config;
pub mod model;
pub mod train;

pub use checkpoint::{decode_model, encode_model, load_model, save_model};
pub use config::VectorizerConfig;
pub use model::{
    elbo_loss, elbo_on_tape, kl_term, reparameterize, standard_normal, reparameterize_with, tokenize, tokenize_values, Embedding,
    LatentStats, Tokens, VectorizerModel,
};
pub use train::{train, train_tokens, trace_csv, EpochStats};
