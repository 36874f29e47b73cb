use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use super::{
    edit_distance, word_count, CorpusError, ImageItem, Result, RoundLine, RoundRecord,
    ALT_TEXT_ANNOTATOR,
};
use crate::io::{append_jsonl, read_jsonl, write_jsonl};

/// Items plus their round chains.
///
/// Mutation goes through `&mut self` (single writer); a `Corpus` is `Sync`
/// and may be shared behind an `Arc` for concurrent reads.
#[derive(Debug, Default, Clone)]
pub struct Corpus {
    items: Vec<ImageItem>,
    index: HashMap<String, usize>,
    rounds: Vec<Vec<RoundRecord>>,
    log: Option<PathBuf>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build a corpus from items, rejecting duplicate ids. Round 1 is created
    /// for every item from its alt-text.
    pub fn from_items(items: impl IntoIterator<Item = ImageItem>) -> Result<Self> {
        let mut corpus = Corpus::new();
        for (i, item) in items.into_iter().enumerate() {
            corpus.insert(item, i + 1)?;
        }
        Ok(corpus)
    }

    /// Load an items JSONL file.
    pub fn ingest_pairs(path: &Path) -> Result<Self> {
        let rows = read_jsonl::<ImageItem>(path)?;
        let mut corpus = Corpus::new();
        for (line, item) in rows {
            corpus.insert(item, line)?;
        }
        log::info!("ingested {} items from {}", corpus.len(), path.display());
        Ok(corpus)
    }

    fn insert(&mut self, item: ImageItem, line: usize) -> Result<()> {
        if self.index.contains_key(&item.id) {
            return Err(CorpusError::DuplicateId { id: item.id, line });
        }
        let base = RoundRecord {
            item_id: item.id.clone(),
            round_no: 1,
            caption: item.alt_text.clone(),
            annotator: ALT_TEXT_ANNOTATOR.to_string(),
            timestamp: 0.0,
            edit_distance_to_prev: 0,
            length_words: word_count(&item.alt_text),
        };
        self.index.insert(item.id.clone(), self.items.len());
        self.items.push(item);
        self.rounds.push(vec![base]);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[ImageItem] {
        &self.items
    }

    pub fn get(&self, id: &str) -> Option<&ImageItem> {
        self.index.get(id).map(|&i| &self.items[i])
    }

    /// All rounds of an item, round 1 first.
    pub fn rounds(&self, id: &str) -> Option<&[RoundRecord]> {
        self.index.get(id).map(|&i| self.rounds[i].as_slice())
    }

    /// The record for `round_no`, if present.
    pub fn round(&self, id: &str, round_no: u32) -> Option<&RoundRecord> {
        let rounds = self.rounds(id)?;
        round_no.checked_sub(1).and_then(|i| rounds.get(i as usize))
    }

    /// The highest-numbered round of an item (the tip of its chain).
    pub fn latest(&self, id: &str) -> Option<&RoundRecord> {
        self.rounds(id).and_then(|r| r.last())
    }

    /// Highest round number present on any item.
    pub fn max_round(&self) -> u32 {
        self.rounds
            .iter()
            .map(|r| r.len() as u32)
            .max()
            .unwrap_or(0)
    }

    /// Append every future round record to `path` as a rounds JSONL line.
    pub fn set_rounds_log(&mut self, path: impl Into<PathBuf>) {
        self.log = Some(path.into());
    }

    /// Commit a new round for `item_id`, stamped with the current time.
    pub fn record_round(
        &mut self,
        item_id: &str,
        round_no: u32,
        caption: &str,
        annotator: &str,
    ) -> Result<RoundRecord> {
        let ts = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        self.record_round_at(item_id, round_no, caption, annotator, ts)
    }

    /// Commit a new round with an explicit timestamp.
    pub fn record_round_at(
        &mut self,
        item_id: &str,
        round_no: u32,
        caption: &str,
        annotator: &str,
        ts: f64,
    ) -> Result<RoundRecord> {
        let rec = self.prepare_round(item_id, round_no, caption, annotator, ts)?;
        if let Some(log) = &self.log {
            append_jsonl(log, &RoundLine::from(&rec))?;
        }
        let idx = self.index[item_id];
        self.rounds[idx].push(rec.clone());
        Ok(rec)
    }

    /// Validate a prospective round and compute its derived fields without
    /// committing it.
    pub fn prepare_round(
        &self,
        item_id: &str,
        round_no: u32,
        caption: &str,
        annotator: &str,
        ts: f64,
    ) -> Result<RoundRecord> {
        let idx = *self
            .index
            .get(item_id)
            .ok_or_else(|| CorpusError::NotFound(item_id.to_string()))?;
        let item = &self.items[idx];
        if round_no == 1 && caption != item.alt_text {
            return Err(CorpusError::Round1Mismatch(item_id.to_string()));
        }
        let chain = &self.rounds[idx];
        let expected = chain.len() as u32 + 1;
        if round_no != expected {
            return Err(CorpusError::Sequencing {
                item_id: item_id.to_string(),
                expected,
                got: round_no,
            });
        }
        let prev = chain.last().map(|r| r.caption.as_str()).unwrap_or("");
        Ok(RoundRecord {
            item_id: item_id.to_string(),
            round_no,
            caption: caption.to_string(),
            annotator: annotator.to_string(),
            timestamp: ts,
            edit_distance_to_prev: if round_no == 1 {
                0
            } else {
                edit_distance(prev, caption)
            },
            length_words: word_count(caption),
        })
    }

    /// Replay a rounds JSONL file. Round-1 lines must repeat the alt-text and
    /// are otherwise skipped since round 1 already exists.
    pub fn load_rounds(&mut self, path: &Path) -> Result<usize> {
        let mut lines = read_jsonl::<RoundLine>(path)?;
        // file order within an item may be arbitrary; chain order may not
        lines.sort_by_key(|(line, r)| (r.round, *line));
        let mut n = 0;
        for (line, r) in lines {
            if r.round == 1 {
                match self.get(&r.id) {
                    Some(item) if item.alt_text == r.caption => continue,
                    Some(_) => return Err(CorpusError::Round1Mismatch(r.id)),
                    None => return Err(CorpusError::NotFound(r.id)),
                }
            }
            let rec = self
                .prepare_round(&r.id, r.round, &r.caption, &r.annotator, r.ts)
                .map_err(|e| match e {
                    CorpusError::Sequencing { .. } | CorpusError::NotFound(_) => {
                        CorpusError::Parse {
                            line,
                            detail: e.to_string(),
                        }
                    }
                    other => other,
                })?;
            let idx = self.index[&r.id];
            self.rounds[idx].push(rec);
            n += 1;
        }
        Ok(n)
    }

    /// Write every round record (including round 1) as rounds JSONL.
    pub fn save_rounds(&self, path: &Path) -> Result<()> {
        let lines: Vec<RoundLine> = self.rounds.iter().flatten().map(RoundLine::from).collect();
        write_jsonl(path, &lines)?;
        Ok(())
    }

    pub fn save_items(&self, path: &Path) -> Result<()> {
        write_jsonl(path, &self.items)?;
        Ok(())
    }
}
