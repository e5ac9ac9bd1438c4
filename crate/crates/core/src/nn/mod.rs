//! Tensors, layers with hand-derived gradients, and the fusion models.

mod conv;
mod layers;
mod lstm;
mod model;
mod tensor;

use thiserror::Error;

use crate::embedding::Modality;

pub use conv::{conv1d_backward, conv1d_forward, Conv1dGrads};
pub use layers::{
    dense_backward, dense_forward, dropout, dropout_backward, global_avg_pool,
    global_avg_pool_backward, relu, relu_backward, softmax, DenseGrads, Mode,
};
pub use lstm::{lstm_backward, lstm_forward, LstmCache, LstmGrads, LstmOutput, LstmWeights};
pub use model::{
    init_params, model_backward, model_forward, model_forward_traced, Arch, ForwardTrace,
    ModelParams, ModelSpec, Readout,
};
pub use tensor::{Tensor, TensorMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("{op}: expected {expected}, found {found}")]
    Shape {
        op: &'static str,
        expected: String,
        found: String,
    },
    #[error("sequence length {len} shorter than kernel {kernel}")]
    SequenceTooShort { len: usize, kernel: usize },
    #[error("dropout rate {0} outside [0, 1)")]
    DropoutRate(f64),
    #[error("{modality} embedding dim {found} != {expected}")]
    InputDim {
        modality: Modality,
        expected: usize,
        found: usize,
    },
    #[error("{modality} embedding has a non-finite value at index {index}")]
    NonFiniteInput { modality: Modality, index: usize },
    #[error("model produced non-finite logits")]
    NonFiniteOutput,
    #[error("missing parameter {0}")]
    MissingParam(String),
    #[error("invalid model spec: {0}")]
    Spec(String),
}
