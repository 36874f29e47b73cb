use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, Result};
use crate::io::{read_jsonl, write_jsonl};

/// Probability `p` that an item's training caption is the synthetic one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixSpec {
    pub p: f64,
    pub seed: u64,
}

impl MixSpec {
    pub fn new(p: f64, seed: u64) -> Result<Self> {
        let spec = Self { p, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(CorpusError::Invalid(format!(
                "mixing ratio p must be in [0, 1], got {}",
                self.p
            )));
        }
        Ok(())
    }
}

/// Where the synthetic caption of each item comes from.
#[derive(Debug, Clone)]
pub enum SyntheticSource {
    /// The item's record for this round number.
    Round(u32),
    /// The item's latest round, which must be round 2 or later.
    Latest,
    /// An explicit id → caption map.
    Map(HashMap<String, String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChoiceSource {
    Alt,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionChoice {
    pub item_id: String,
    pub chosen_source: ChoiceSource,
    pub chosen_text: String,
}

/// One line of an exported training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLine {
    pub id: String,
    pub text: String,
    pub source: ChoiceSource,
}

fn synthetic_caption<'a>(
    corpus: &'a Corpus,
    source: &'a SyntheticSource,
    id: &str,
) -> Option<&'a str> {
    match source {
        SyntheticSource::Round(r) => corpus.round(id, *r).map(|rec| rec.caption.as_str()),
        SyntheticSource::Latest => corpus
            .latest(id)
            .filter(|rec| rec.round_no >= 2)
            .map(|rec| rec.caption.as_str()),
        SyntheticSource::Map(m) => m.get(id).map(String::as_str),
    }
}

/// Pick alt-text or synthetic caption per item, independently with
/// probability `p` for synthetic, in corpus order. One uniform draw per item
/// from a ChaCha8 stream seeded with `spec.seed`.
pub fn mix_sample(
    corpus: &Corpus,
    spec: &MixSpec,
    source: &SyntheticSource,
) -> Result<Vec<CaptionChoice>> {
    spec.validate()?;
    let synthetic: Vec<&str> = corpus
        .items()
        .iter()
        .map(|item| {
            synthetic_caption(corpus, source, &item.id)
                .ok_or_else(|| CorpusError::MissingSynthetic(item.id.clone()))
        })
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(corpus
        .items()
        .iter()
        .zip(synthetic)
        .map(|(item, syn)| {
            let draw: f64 = rng.random();
            if draw < spec.p {
                CaptionChoice {
                    item_id: item.id.clone(),
                    chosen_source: ChoiceSource::Synthetic,
                    chosen_text: syn.to_string(),
                }
            } else {
                CaptionChoice {
                    item_id: item.id.clone(),
                    chosen_source: ChoiceSource::Alt,
                    chosen_text: item.alt_text.clone(),
                }
            }
        })
        .collect())
}

/// Write choices as `{id, text, source}` JSON lines in input order.
pub fn export_training_set(choices: &[CaptionChoice], path: &Path) -> Result<()> {
    if choices.is_empty() {
        return Err(CorpusError::Invalid("no choices to export".into()));
    }
    let lines: Vec<TrainingLine> = choices
        .iter()
        .map(|c| TrainingLine {
            id: c.item_id.clone(),
            text: c.chosen_text.clone(),
            source: c.chosen_source,
        })
        .collect();
    write_jsonl(path, &lines)?;
    Ok(())
}

pub fn read_training_set(path: &Path) -> Result<Vec<TrainingLine>> {
    Ok(read_jsonl::<TrainingLine>(path)?
        .into_iter()
        .map(|(_, l)| l)
        .collect())
}
