//! Image/alt-text items, multi-round caption records and the statistics and
//! training-set construction built on top of them.
//!
//! Round 1 of every item is its alt-text, created when the item enters the
//! corpus. Each later round is an edit of the round before it, and the store
//! keeps the character edit distance between consecutive rounds alongside
//! each record.

mod edit;
mod embed;
mod item;
mod mix;
mod stats;
mod store;

pub use edit::edit_distance;
pub use embed::{sidecar_path, EmbeddingMatrix, TextEmbedder, EMBEDDING_MAGIC, EMBEDDING_VERSION};
pub use item::{word_count, ImageItem, RoundLine, RoundRecord, Source, ALT_TEXT_ANNOTATOR};
pub use mix::{
    export_training_set, mix_sample, read_training_set, CaptionChoice, ChoiceSource, MixSpec,
    SyntheticSource, TrainingLine,
};
pub use stats::{round_stats, RoundStats};
pub use store::Corpus;

use std::io;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("duplicate item id {id:?} on line {line}")]
    DuplicateId { id: String, line: usize },
    #[error("unknown item id {0:?}")]
    NotFound(String),
    #[error("item {item_id:?}: expected round {expected}, got round {got}")]
    Sequencing {
        item_id: String,
        expected: u32,
        got: u32,
    },
    #[error("item {0:?}: round 1 caption must equal the alt-text verbatim")]
    Round1Mismatch(String),
    #[error("no item has a record for round {0}")]
    EmptyRound(u32),
    #[error("item {0:?} has no synthetic caption")]
    MissingSynthetic(String),
    #[error("invalid value: {0}")]
    Invalid(String),
    #[error("embedding format error: {0}")]
    Format(String),
    #[error("embedding payload truncated: expected {expected} bytes, found {actual}")]
    Length { expected: u64, actual: u64 },
    #[error("non-finite embedding value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
}

impl From<crate::io::JsonlError> for CorpusError {
    fn from(e: crate::io::JsonlError) -> Self {
        match e {
            crate::io::JsonlError::Io(e) => CorpusError::Io(e),
            crate::io::JsonlError::Parse { line, source } => CorpusError::Parse {
                line,
                detail: source.to_string(),
            },
        }
    }
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;
