//! Minimal differentiable encoder-decoder substrate and decoding strategies.

pub mod checkpoint;
pub mod config;
pub mod decode;
pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod params;
pub mod tape;
pub mod tensor;
pub mod train;
pub mod transformer;
pub mod vocab;

use thiserror::Error;

pub use checkpoint::Checkpoint;
pub use config::{DecodeConfig, ModelConfig};
pub use decode::{beam_search, diverse_beam_search, nucleus_sample, Hypothesis, StepLm};
pub use gradcheck::{grad_check, GradCheckReport};
pub use optim::{AdamW, OptimConfig};
pub use params::{Grads, ParamStore};
pub use tape::{Tape, Var};
pub use tensor::Matrix;
pub use train::{TrainConfig, TrainReport};
pub use transformer::Seq2Seq;
pub use vocab::Vocab;

#[derive(Debug, Error)]
pub enum Seq2SeqError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("token id {id} out of range for vocabulary of {vocab_size}")]
    TokenOutOfRange { id: usize, vocab_size: usize },
    #[error("sequence of length {len} exceeds max_positions {max}; truncate the input")]
    TooLong { len: usize, max: usize },
    #[error("empty input sequence")]
    EmptyInput,
    #[error("non-finite loss in {0}")]
    NonFinite(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
