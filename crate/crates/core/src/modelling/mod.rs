//! Executing analytics operators and predicting their outputs from embeddings.

pub mod mlp;
pub mod ols;
pub mod operator;
pub mod pipeline;
pub mod surrogate;
pub mod svm;

pub use mlp::{mlp_fit, MlpConfig, MlpModel, MlpTask};
pub use ols::{min_norm_fit, ols_fit, LinearFit};
pub use operator::{
    execute_operator, operator_work, OperatorCache, OperatorKind, OperatorResult, OperatorSpec, RESULTS_HEADER,
};
pub use pipeline::{model_and_predict, Plan, Prediction, Selector};
pub use surrogate::{build_surrogate, SurrogateFit, SurrogateKind, SurrogateModel, SurrogateSpec};
pub use svm::{svm_sgd_fit, SvmConfig, SvmModel};
