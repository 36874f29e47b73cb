use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, EmbeddingMatrix, Result, TextEmbedder};
use crate::metrics::{clip_score, CLIP_SCALE};

/// Per-round means over all items that have a record for that round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round_no: u32,
    pub item_count: usize,
    pub mean_length_words: f64,
    pub mean_edit_distance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_alignment: Option<f64>,
}

/// Length, edit-distance and (optionally) image-text alignment means for one
/// round. Alignment averages over items with an embedding row and is omitted
/// when no embedding inputs are given or no item has a row.
pub fn round_stats(
    corpus: &Corpus,
    round_no: u32,
    alignment: Option<(&EmbeddingMatrix, &dyn TextEmbedder)>,
) -> Result<RoundStats> {
    let mut n = 0usize;
    let mut len_sum = 0usize;
    let mut ed_sum = 0usize;
    let mut align_sum = 0.0;
    let mut align_n = 0usize;
    for item in corpus.items() {
        let Some(rec) = corpus.round(&item.id, round_no) else {
            continue;
        };
        n += 1;
        len_sum += rec.length_words;
        ed_sum += rec.edit_distance_to_prev;
        if let (Some((emb, text_embedder)), Some(row)) = (alignment, item.embedding_row) {
            let image = emb.row(row).ok_or_else(|| {
                CorpusError::Invalid(format!(
                    "item {:?} embedding row {row} out of range",
                    item.id
                ))
            })?;
            let text = text_embedder.embed(&rec.caption);
            // zero-norm text vectors (nothing recognised) align at 0
            let score = clip_score(image, &text, CLIP_SCALE).unwrap_or(0.0);
            align_sum += score;
            align_n += 1;
        }
    }
    if n == 0 {
        return Err(CorpusError::EmptyRound(round_no));
    }
    Ok(RoundStats {
        round_no,
        item_count: n,
        mean_length_words: len_sum as f64 / n as f64,
        mean_edit_distance: ed_sum as f64 / n as f64,
        mean_alignment: (align_n > 0).then(|| align_sum / align_n as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ImageItem, Source};
    use std::collections::HashMap;

    fn item(id: &str, alt: &str, row: Option<usize>) -> ImageItem {
        ImageItem {
            id: id.into(),
            image_ref: id.into(),
            alt_text: alt.into(),
            source: Source::Other,
            embedding_row: row,
        }
    }

    struct Fixed(Vec<f32>);
    impl TextEmbedder for Fixed {
        fn embed(&self, _: &str) -> Vec<f32> {
            self.0.clone()
        }
    }

    #[test]
    fn single_item_round_one() {
        let c = Corpus::from_items([item("a", "great gray owl", None)]).unwrap();
        let s = round_stats(&c, 1, None).unwrap();
        assert_eq!(s.item_count, 1);
        assert_eq!(s.mean_length_words, 3.0);
        assert_eq!(s.mean_edit_distance, 0.0);
        assert_eq!(s.mean_alignment, None);
        assert!(matches!(
            round_stats(&c, 2, None),
            Err(CorpusError::EmptyRound(2))
        ));
    }

    #[test]
    fn means_over_items_present_in_round() {
        let mut c = Corpus::from_items([item("a", "x", None), item("b", "y y", None)]).unwrap();
        c.record_round("a", 2, "x yz", "v").unwrap();
        let s2 = round_stats(&c, 2, None).unwrap();
        assert_eq!(s2.item_count, 1);
        assert_eq!(s2.mean_edit_distance, 3.0);
        let s1 = round_stats(&c, 1, None).unwrap();
        assert_eq!(s1.mean_length_words, 1.5);
    }

    #[test]
    fn alignment_only_with_embeddings() {
        let c = Corpus::from_items([item("a", "x", Some(0)), item("b", "y", Some(1))]).unwrap();
        let emb = EmbeddingMatrix::new(2, vec![1.0, 0.0, 0.0, 1.0], HashMap::new()).unwrap();
        let text = Fixed(vec![1.0, 0.0]);
        let s = round_stats(&c, 1, Some((&emb, &text))).unwrap();
        // item a aligns perfectly, b is orthogonal
        assert!((s.mean_alignment.unwrap() - 50.0).abs() < 1e-9);
    }
}
