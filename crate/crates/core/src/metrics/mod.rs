//! Dense caption evaluation: CLIP-style alignment, BLEU-1, METEOR-lite,
//! ROUGE-L, CIDEr-D and noun phrase precision/recall/F1, with a macro-averaged
//! suite over an aligned prediction/reference set.

mod bleu;
mod cider;
mod clip;
mod meteor;
mod np;
mod rouge;
mod suite;
mod tokens;

pub use bleu::bleu1;
pub use cider::{
    build_ngram_stats, cider_d, cider_d_with_sigma, NGramStats, CIDER_SIGMA, MAX_NGRAM,
};
pub use clip::{clip_score, CLIP_SCALE};
pub use meteor::{meteor_lite, stem};
pub use np::{np_prf, NpScores};
pub use rouge::{lcs_len, rouge_l};
pub use suite::{
    aggregate, evaluate_suite, score_items, CaptionRow, ItemScores, MetricReport, SuiteOptions,
};
pub use tokens::metric_tokens;

/// A bounded score plus a flag set when an input was empty after
/// tokenization (the value is then 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub value: f64,
    pub empty_input: bool,
}

impl Scored {
    pub(crate) fn ok(value: f64) -> Self {
        Self {
            value,
            empty_input: false,
        }
    }

    pub(crate) fn empty() -> Self {
        Self {
            value: 0.0,
            empty_input: true,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: {left} vs {right}")]
    Shape { left: usize, right: usize },
    #[error("predictions and references are not aligned: missing predictions {missing_predictions:?}, missing references {missing_references:?}")]
    Alignment {
        missing_predictions: Vec<String>,
        missing_references: Vec<String>,
    },
    #[error("duplicate prediction id {0:?}")]
    DuplicatePrediction(String),
    #[error("empty reference corpus")]
    EmptyCorpus,
}
