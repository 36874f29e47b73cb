use serde::{Deserialize, Serialize};

use crate::textproc::{noun_phrases, Lexicon};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NpScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision/recall/F1 of the candidate's noun phrase set against the
/// reference's, counting the set intersection as true positives. Empty sets
/// give 0 for the affected ratio.
pub fn np_prf(candidate: &str, reference: &str, lexicon: &Lexicon) -> NpScores {
    let c = noun_phrases(candidate, lexicon);
    let r = noun_phrases(reference, lexicon);
    let tp = c.intersection(&r).count() as f64;
    let precision = if c.is_empty() {
        0.0
    } else {
        tp / c.len() as f64
    };
    let recall = if r.is_empty() {
        0.0
    } else {
        tp / r.len() as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    NpScores {
        precision,
        recall,
        f1,
    }
}
