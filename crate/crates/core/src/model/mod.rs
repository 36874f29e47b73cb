//! Prefix-LM captioner.
//!
//! A mapping network turns one frozen image embedding into `n_visual`
//! visual tokens. The decoder sees `[visual | alt-text | caption]` with
//! absolute learned positions and causal attention; only caption-region
//! next-token predictions contribute to the loss. All arithmetic is `f64`.

mod config;
mod forward;
mod infer;
mod io;
mod layout;
mod ops;
mod params;

pub use config::{DecodeConfig, ModelConfig};
pub use forward::{forward_loss, loss_and_grad, LossOutput};
pub use infer::{
    generate, generate_with, map_embedding, nucleus_set, sample_token, GenerateOptions,
    IncrementalDecoder,
};
pub use io::{load_model, load_model_for_vocab, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use layout::{layout_sequence, Role, SequenceBatch, SequenceRow};
pub use ops::cross_entropy;
pub use params::{init_model, BlockLayout, Layout, ModelParams, TensorSpec};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("config error: {0}")]
    Config(String),
    #[error("shape error: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("batch has no loss-masked positions")]
    DegenerateBatch,
    #[error("model file format error: {0}")]
    Format(String),
    #[error("model vocabulary size {file} does not match expected vocabulary size {expected}")]
    VocabMismatch { file: usize, expected: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;
