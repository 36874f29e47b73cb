use serde::{Deserialize, Serialize};

use crate::metrics::np_prf;
use crate::model::{generate, DecodeConfig, ModelParams};
use crate::par::Exec;
use crate::textproc::{detokenize, tokenize, Lexicon, Vocab};

use super::{Result, World, WorldItem};

/// Mean noun-phrase scores of one generation variant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct VariantScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Paired comparison of captions generated with the real alt-text and
/// with the empty-alt token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealignReport {
    pub n_items: usize,
    pub with_alt: VariantScores,
    pub empty_alt: VariantScores,
    /// `with_alt.f1 - empty_alt.f1`.
    pub f1_gain: f64,
    /// Share of items with an alt-text distractor whose with-alt caption
    /// names the distractor.
    pub distractor_mention_rate: f64,
    pub n_distractor_items: usize,
    /// Share of (item, rare concept named in the alt-text) pairs whose
    /// with-alt caption names the rare concept.
    pub rare_copy_rate: f64,
    pub n_rare_pairs: usize,
    /// Items whose two generations differ.
    pub n_differing: usize,
}

struct ItemOutcome {
    with: crate::metrics::NpScores,
    without: crate::metrics::NpScores,
    distractor_named: Option<bool>,
    rare_copied: Vec<bool>,
    differ: bool,
}

fn names(text: &str, name: &str) -> bool {
    text.split(|c: char| !c.is_alphanumeric())
        .any(|w| w == name)
}

/// Generate twice per held-out item (real alt-text, empty alt) and score
/// both against the canonical target. Item `i` is decoded with seed
/// `decode.seed + i` in both variants; `max_tokens` is capped at the
/// model's `max_gen`.
pub fn realign_eval(
    params: &ModelParams,
    world: &World,
    items: &[WorldItem],
    vocab: &Vocab,
    lexicon: &Lexicon,
    decode: &DecodeConfig,
    exec: Exec,
) -> Result<RealignReport> {
    let indexed: Vec<(usize, &WorldItem)> = items.iter().enumerate().collect();
    let outcomes = exec.map(&indexed, |&(i, item)| -> Result<ItemOutcome> {
        let cfg = DecodeConfig {
            seed: decode.seed.wrapping_add(i as u64),
            max_tokens: decode.max_tokens.min(params.config.max_gen),
            ..*decode
        };
        let alt = tokenize(vocab, &item.alt_text);
        let text = |ids: Vec<u32>| -> Result<String> {
            Ok(detokenize(vocab, &ids)
                .map_err(|e| super::TrainError::Config(e.to_string()))?
                .text)
        };
        let with_ids = generate(params, &item.image, &alt, &cfg)?;
        let without_ids = generate(params, &item.image, &[], &cfg)?;
        let differ = with_ids != without_ids;
        let with = text(with_ids)?;
        let without = text(without_ids)?;
        let rare_copied = item
            .alt_concepts
            .iter()
            .filter(|&&c| world.concepts[c].rare)
            .map(|&c| names(&with, &world.concepts[c].name))
            .collect();
        Ok(ItemOutcome {
            with: np_prf(&with, &item.caption, lexicon),
            without: np_prf(&without, &item.caption, lexicon),
            distractor_named: item
                .distractor
                .map(|d| names(&with, &world.concepts[d].name)),
            rare_copied,
            differ,
        })
    });
    let mut sum = [[0.0; 3]; 2];
    let (mut n_dis, mut dis_named, mut n_rare, mut rare_copied, mut differ) = (0, 0, 0, 0, 0);
    let n = items.len();
    for o in outcomes {
        let o = o?;
        for (k, s) in [o.with, o.without].iter().enumerate() {
            sum[k][0] += s.precision;
            sum[k][1] += s.recall;
            sum[k][2] += s.f1;
        }
        if let Some(named) = o.distractor_named {
            n_dis += 1;
            dis_named += named as usize;
        }
        n_rare += o.rare_copied.len();
        rare_copied += o.rare_copied.iter().filter(|&&b| b).count();
        differ += o.differ as usize;
    }
    let mean = |k: usize| {
        let d = n.max(1) as f64;
        VariantScores {
            precision: sum[k][0] / d,
            recall: sum[k][1] / d,
            f1: sum[k][2] / d,
        }
    };
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let with_alt = mean(0);
    let empty_alt = mean(1);
    Ok(RealignReport {
        n_items: n,
        with_alt,
        empty_alt,
        f1_gain: with_alt.f1 - empty_alt.f1,
        distractor_mention_rate: ratio(dis_named, n_dis),
        n_distractor_items: n_dis,
        rare_copy_rate: ratio(rare_copied, n_rare),
        n_rare_pairs: n_rare,
        n_differing: differ,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_model, ModelConfig};
    use crate::textproc::build_vocab;
    use crate::train::{synth_world, WorldSpec};

    #[test]
    fn untrained_model_has_no_signal() {
        let world = synth_world(&WorldSpec::default()).unwrap();
        let words = world.vocabulary_words();
        let vocab = build_vocab(words.iter().map(String::as_str), 300).unwrap();
        let c = ModelConfig {
            d_model: 8,
            n_heads: 2,
            n_decoder_layers: 1,
            n_mapping_layers: 1,
            vocab_size: vocab.len(),
            image_embed_dim: world.spec.embed_dim,
            n_visual: 2,
            m_alt: 6,
            max_gen: 10,
        };
        let p = init_model(c, 0).unwrap();
        let items = world.generate(20, 99);
        let lex = Lexicon::default_english();
        let r = realign_eval(
            &p,
            &world,
            &items,
            &vocab,
            &lex,
            &DecodeConfig::default(),
            Exec::Parallel,
        )
        .unwrap();
        assert_eq!(r.n_items, 20);
        assert!(r.with_alt.f1 < 0.2 && r.empty_alt.f1 < 0.2, "{r:?}");
        let again = realign_eval(
            &p,
            &world,
            &items,
            &vocab,
            &lex,
            &DecodeConfig::default(),
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn word_boundary_matching() {
        assert!(names("a photo of kaba and lime", "kaba"));
        assert!(!names("a photo of kabana", "kaba"));
    }
}
