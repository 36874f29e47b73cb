use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    bleu1, build_ngram_stats, cider_d, clip_score, meteor_lite, np_prf, rouge_l, MetricError,
    NpScores, CLIP_SCALE,
};
use crate::corpus::{EmbeddingMatrix, TextEmbedder};
use crate::par::Exec;
use crate::textproc::Lexicon;

/// One caption keyed by item id (`{"id", "text"}` per JSONL line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRow {
    pub id: String,
    #[serde(alias = "caption")]
    pub text: String,
}

impl CaptionRow {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemScores {
    pub id: String,
    pub clip_score: Option<f64>,
    pub bleu1: f64,
    pub meteor: f64,
    pub rouge_l: f64,
    pub cider_d: f64,
    pub np: NpScores,
}

/// Macro-averaged suite scores. `clip_score` is absent when no embeddings
/// were supplied (or none of the items had one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub clip_score: Option<f64>,
    pub bleu1: f64,
    pub meteor: f64,
    pub rouge_l: f64,
    pub cider_d: f64,
    pub np_precision: f64,
    pub np_recall: f64,
    pub np_f1: f64,
    pub n_items: usize,
}

impl MetricReport {
    /// Aligned two-column text table.
    pub fn to_table(&self) -> String {
        let clip = self
            .clip_score
            .map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
        let rows = [
            ("clip_score", clip),
            ("bleu1", format!("{:.4}", self.bleu1)),
            ("meteor", format!("{:.4}", self.meteor)),
            ("rouge_l", format!("{:.4}", self.rouge_l)),
            ("cider_d", format!("{:.4}", self.cider_d)),
            ("np_precision", format!("{:.4}", self.np_precision)),
            ("np_recall", format!("{:.4}", self.np_recall)),
            ("np_f1", format!("{:.4}", self.np_f1)),
            ("n_items", self.n_items.to_string()),
        ];
        let mut out = String::new();
        let _ = writeln!(out, "{:<14}{:>12}", "metric", "value");
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<14}{v:>12}");
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    pub clip_scale: f64,
    pub exec: Exec,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            clip_scale: CLIP_SCALE,
            exec: Exec::default(),
        }
    }
}

fn best_np(candidate: &str, refs: &[&str], lex: &Lexicon) -> NpScores {
    refs.iter()
        .map(|r| np_prf(candidate, r, lex))
        .max_by(|a, b| {
            a.f1.total_cmp(&b.f1)
                .then(a.precision.total_cmp(&b.precision))
                .then(a.recall.total_cmp(&b.recall))
        })
        .unwrap_or_default()
}

/// Per-item scores in prediction order. Each prediction id must have at
/// least one reference row and vice versa; CIDEr document frequencies are
/// computed over the reference sets of this evaluation.
pub fn score_items(
    predictions: &[CaptionRow],
    references: &[CaptionRow],
    alignment: Option<(&EmbeddingMatrix, &dyn TextEmbedder)>,
    lexicon: &Lexicon,
    opts: SuiteOptions,
) -> Result<Vec<ItemScores>, MetricError> {
    let mut seen = HashSet::new();
    for p in predictions {
        if !seen.insert(p.id.as_str()) {
            return Err(MetricError::DuplicatePrediction(p.id.clone()));
        }
    }
    let mut refs: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in references {
        refs.entry(&r.id).or_default().push(&r.text);
    }
    let pred_ids: BTreeSet<&str> = seen.into_iter().collect();
    let ref_ids: BTreeSet<&str> = refs.keys().copied().collect();
    if pred_ids != ref_ids {
        return Err(MetricError::Alignment {
            missing_predictions: ref_ids
                .difference(&pred_ids)
                .map(|s| s.to_string())
                .collect(),
            missing_references: pred_ids
                .difference(&ref_ids)
                .map(|s| s.to_string())
                .collect(),
        });
    }
    if predictions.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let ref_sets: Vec<Vec<&str>> = refs.values().cloned().collect();
    let stats = build_ngram_stats(&ref_sets)?;

    let results = opts
        .exec
        .map(predictions, |p| -> Result<ItemScores, MetricError> {
            let item_refs = &refs[p.id.as_str()];
            let clip = match alignment {
                Some((emb, embedder)) => emb.by_id(&p.id).map(|image| {
                    clip_score(image, &embedder.embed(&p.text), opts.clip_scale).unwrap_or(0.0)
                }),
                None => None,
            };
            Ok(ItemScores {
                id: p.id.clone(),
                clip_score: clip,
                bleu1: bleu1(&p.text, item_refs).value,
                meteor: item_refs
                    .iter()
                    .map(|r| meteor_lite(&p.text, r).value)
                    .fold(0.0, f64::max),
                rouge_l: rouge_l(&p.text, item_refs).value,
                cider_d: cider_d(&p.text, item_refs, &stats)?,
                np: best_np(&p.text, item_refs, lexicon),
            })
        });
    results.into_iter().collect()
}

/// Macro average of per-item scores, summed in input order.
pub fn aggregate(items: &[ItemScores]) -> MetricReport {
    let n = items.len().max(1) as f64;
    let mean = |f: &dyn Fn(&ItemScores) -> f64| items.iter().map(f).sum::<f64>() / n;
    let clips: Vec<f64> = items.iter().filter_map(|i| i.clip_score).collect();
    MetricReport {
        clip_score: (!clips.is_empty()).then(|| clips.iter().sum::<f64>() / clips.len() as f64),
        bleu1: mean(&|i| i.bleu1),
        meteor: mean(&|i| i.meteor),
        rouge_l: mean(&|i| i.rouge_l),
        cider_d: mean(&|i| i.cider_d),
        np_precision: mean(&|i| i.np.precision),
        np_recall: mean(&|i| i.np.recall),
        np_f1: mean(&|i| i.np.f1),
        n_items: items.len(),
    }
}

/// Score every prediction and macro-average.
pub fn evaluate_suite(
    predictions: &[CaptionRow],
    references: &[CaptionRow],
    alignment: Option<(&EmbeddingMatrix, &dyn TextEmbedder)>,
    lexicon: &Lexicon,
    opts: SuiteOptions,
) -> Result<MetricReport, MetricError> {
    let items = score_items(predictions, references, alignment, lexicon, opts)?;
    Ok(aggregate(&items))
}
