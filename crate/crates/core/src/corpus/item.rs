use serde::{Deserialize, Serialize};

/// Annotator name stored on the auto-created round-1 record.
pub const ALT_TEXT_ANNOTATOR: &str = "alt-text";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Wit,
    Metaclip,
    Synthetic,
    Other,
}

/// One image with its publisher-provided alt-text. `image_ref` is opaque and
/// never dereferenced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageItem {
    pub id: String,
    pub image_ref: String,
    #[serde(default)]
    pub alt_text: String,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_row: Option<usize>,
}

/// A stored caption for one annotation round of one item.
///
/// Records are immutable once committed. `edit_distance_to_prev` is the
/// character edit distance to the previous round's caption (0 for round 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub item_id: String,
    pub round_no: u32,
    pub caption: String,
    pub annotator: String,
    pub timestamp: f64,
    pub edit_distance_to_prev: usize,
    pub length_words: usize,
}

/// Wire format of one line of a rounds JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLine {
    pub id: String,
    pub round: u32,
    pub caption: String,
    pub annotator: String,
    pub ts: f64,
}

impl From<&RoundRecord> for RoundLine {
    fn from(r: &RoundRecord) -> Self {
        RoundLine {
            id: r.item_id.clone(),
            round: r.round_no,
            caption: r.caption.clone(),
            annotator: r.annotator.clone(),
            ts: r.timestamp,
        }
    }
}

/// Number of maximal non-whitespace runs.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_count_ignores_whitespace_shape() {
        assert_eq!(word_count(""), 0);
        assert_eq!(word_count("   "), 0);
        assert_eq!(word_count(" a  photo\tof\n an owl "), 5);
    }

    #[test]
    fn item_json_schema() {
        let line = r#"{"id":"x1","image_ref":"s3://b/1.jpg","alt_text":"owl","source":"wit","embedding_row":3}"#;
        let item: ImageItem = serde_json::from_str(line).unwrap();
        assert_eq!(item.source, Source::Wit);
        assert_eq!(item.embedding_row, Some(3));
        let back = serde_json::to_string(&item).unwrap();
        assert_eq!(back, line);

        let no_row: ImageItem =
            serde_json::from_str(r#"{"id":"x2","image_ref":"r","alt_text":"","source":"other"}"#)
                .unwrap();
        assert_eq!(no_row.embedding_row, None);
    }
}
