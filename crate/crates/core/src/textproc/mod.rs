//! Tokenizer with lossless byte fallback, lexicon-driven noun phrase chunker
//! and starting-prompt validation.

mod chunk;
mod lexicon;
mod prompts;
mod vocab;

pub use chunk::{noun_phrases, NounPhrase};
pub use lexicon::{Lexicon, Pos};
pub use prompts::{starting_prompt_check, PromptCheck, STARTING_PROMPTS};
pub use vocab::{
    build_vocab, detokenize, tokenize, Detokenized, TokenKind, Vocab, BOS, BYTE_BASE, EMPTY_ALT,
    EOS, MIN_VOCAB_SIZE, PAD,
};

#[derive(Debug, thiserror::Error)]
pub enum TextError {
    #[error("config error: {0}")]
    Config(String),
    #[error("token id {id} out of range for vocabulary of size {size}")]
    Range { id: u32, size: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("invalid vocabulary file: {0}")]
    InvalidVocab(String),
}

impl From<crate::io::JsonlError> for TextError {
    fn from(e: crate::io::JsonlError) -> Self {
        match e {
            crate::io::JsonlError::Io(e) => TextError::Io(e),
            crate::io::JsonlError::Parse { line, source } => TextError::Parse {
                line,
                detail: source.to_string(),
            },
        }
    }
}
