//! Minimal dense neural-network toolkit: tensors, a reverse-mode tape,
//! transformer layers, Adam, gradient checking and checkpoints.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod params;
pub mod tape;
pub mod tensor;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, CheckpointHeader};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use optim::{adam_step, AdamConfig, AdamState};
pub use params::{Gradients, ParamSet};
pub use tape::{GradTape, Var};
pub use tensor::Tensor;
