//! Training: optimisation loop (pretrain and finetune), learning-rate
//! schedule, the synthetic concept world, gradient checking, re-alignment
//! evaluation and the throughput bench.

mod bench;
mod config;
mod gradcheck;
mod optim;
mod realign;
mod schedule;
mod trainer;
mod world;

pub use bench::{bench_throughput, config_hash, BenchReport};
pub use config::TrainConfig;
pub use gradcheck::{grad_check, relative_error, GradCheckReport, GradCoords, REL_FLOOR_FRACTION};
pub use optim::{clip_grad_norm, global_norm, AdamW};
pub use realign::{realign_eval, RealignReport, VariantScores};
pub use schedule::lr_schedule;
pub use trainer::{
    build_batch, corpus_examples, finetune, finetune_examples, pretrain, EmptyAltSampler, Example,
    StepLog, TrainReport,
};
pub use world::{synth_world, Concept, World, WorldItem, WorldSpec, WorldTextEmbedder, HYPERNYMS};

use crate::model::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("config error: {0}")]
    Config(String),
    #[error("step {step} is outside the schedule of {total} steps")]
    Range { step: usize, total: usize },
    #[error("non-finite {what} at step {step} (batch items: {})", batch_ids.join(", "))]
    NonFinite {
        what: &'static str,
        step: usize,
        batch_ids: Vec<String>,
    },
    #[error("empty training set")]
    EmptyData,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = TrainError> = std::result::Result<T, E>;
