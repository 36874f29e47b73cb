use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TextError;
use crate::io::{read_jsonl, write_jsonl};

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
/// Marks "no alt-text provided"; distinct from padding.
pub const EMPTY_ALT: u32 = 3;
/// First of the 256 byte-fallback ids.
pub const BYTE_BASE: u32 = 4;
/// Reserved ids plus the byte block.
pub const MIN_VOCAB_SIZE: usize = BYTE_BASE as usize + 256;

const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<empty_alt>"];

fn byte_token(b: u8) -> String {
    format!("<0x{b:02X}>")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind<'a> {
    Special(u32),
    Byte(u8),
    Word(&'a str),
}

/// Token string ↔ id bijection: 4 reserved ids, 256 byte ids, then learned
/// words ordered by descending corpus frequency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    words: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabLine {
    token: String,
    id: u32,
}

impl Vocab {
    fn with_words(learned: Vec<String>) -> Self {
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend((0..=255u8).map(byte_token));
        let mut words = HashMap::with_capacity(learned.len());
        for w in learned {
            words.insert(w.clone(), tokens.len() as u32);
            tokens.push(w);
        }
        Self { tokens, words }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Learned (word) tokens in id order.
    pub fn learned(&self) -> &[String] {
        &self.tokens[MIN_VOCAB_SIZE..]
    }

    pub fn word_id(&self, word: &str) -> Option<u32> {
        self.words.get(word).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn kind(&self, id: u32) -> Result<TokenKind<'_>, TextError> {
        match id {
            PAD | BOS | EOS | EMPTY_ALT => Ok(TokenKind::Special(id)),
            i if i < MIN_VOCAB_SIZE as u32 => Ok(TokenKind::Byte((i - BYTE_BASE) as u8)),
            i => self.token(i).map(TokenKind::Word).ok_or(TextError::Range {
                id,
                size: self.len(),
            }),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), TextError> {
        let lines: Vec<VocabLine> = self
            .tokens
            .iter()
            .enumerate()
            .map(|(id, token)| VocabLine {
                token: token.clone(),
                id: id as u32,
            })
            .collect();
        write_jsonl(path, &lines)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        let mut lines: Vec<VocabLine> = read_jsonl(path)?.into_iter().map(|(_, l)| l).collect();
        lines.sort_by_key(|l| l.id);
        for (i, l) in lines.iter().enumerate() {
            if l.id as usize != i {
                return Err(TextError::InvalidVocab(format!(
                    "ids not contiguous at {}",
                    l.id
                )));
            }
        }
        if lines.len() < MIN_VOCAB_SIZE {
            return Err(TextError::InvalidVocab(format!(
                "{} entries, need at least {MIN_VOCAB_SIZE}",
                lines.len()
            )));
        }
        let fresh = Vocab::with_words(Vec::new());
        for (l, expected) in lines.iter().zip(&fresh.tokens) {
            if &l.token != expected {
                return Err(TextError::InvalidVocab(format!(
                    "id {} should be {expected:?}, found {:?}",
                    l.id, l.token
                )));
            }
        }
        let learned: Vec<String> = lines
            .into_iter()
            .skip(MIN_VOCAB_SIZE)
            .map(|l| l.token)
            .collect();
        let v = Vocab::with_words(learned);
        if v.words.len() != v.len() - MIN_VOCAB_SIZE {
            return Err(TextError::InvalidVocab("duplicate learned token".into()));
        }
        Ok(v)
    }
}

/// Word-level vocabulary: whitespace-separated words ranked by frequency
/// (ties broken lexicographically) fill the slots after the reserved and
/// byte blocks.
pub fn build_vocab<'a, I>(texts: I, size: usize) -> Result<Vocab, TextError>
where
    I: IntoIterator<Item = &'a str>,
{
    if size < MIN_VOCAB_SIZE {
        return Err(TextError::Config(format!(
            "vocabulary size {size} is below the minimum {MIN_VOCAB_SIZE}"
        )));
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for text in texts {
        for w in text.split_whitespace() {
            *counts.entry(w).or_default() += 1;
        }
    }
    let reserved: Vec<String> = Vocab::with_words(Vec::new()).tokens;
    let mut ranked: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|(w, _)| !reserved.iter().any(|r| r == w))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let learned = ranked
        .into_iter()
        .take(size - MIN_VOCAB_SIZE)
        .map(|(w, _)| w.to_string())
        .collect();
    Ok(Vocab::with_words(learned))
}

fn push_bytes(out: &mut Vec<u32>, s: &str) {
    out.extend(s.bytes().map(|b| BYTE_BASE + b as u32));
}

/// Encode text. In-vocabulary words become word ids; everything else
/// (out-of-vocabulary words and any whitespace other than the single space
/// implied between two word tokens) is emitted as UTF-8 byte ids.
pub fn tokenize(vocab: &Vocab, text: &str) -> Vec<u32> {
    let mut out = Vec::new();
    let mut prev_word = false;
    let mut rest = text;
    while !rest.is_empty() {
        let ws_end = rest
            .find(|c: char| !c.is_whitespace())
            .unwrap_or(rest.len());
        let (ws, tail) = rest.split_at(ws_end);
        if tail.is_empty() {
            push_bytes(&mut out, ws);
            break;
        }
        let word_end = tail.find(char::is_whitespace).unwrap_or(tail.len());
        let (word, tail) = tail.split_at(word_end);
        match vocab.word_id(word) {
            Some(id) => {
                let implied = (prev_word && ws == " ") || (!prev_word && ws.is_empty());
                if !implied {
                    push_bytes(&mut out, ws);
                }
                out.push(id);
                prev_word = true;
            }
            None => {
                push_bytes(&mut out, ws);
                push_bytes(&mut out, word);
                prev_word = false;
            }
        }
        rest = tail;
    }
    out
}

/// Decoded text; `lossy` is set when a byte run was not valid UTF-8 and was
/// decoded with replacement characters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Detokenized {
    pub text: String,
    pub lossy: bool,
}

/// Inverse of [`tokenize`]. Consecutive word tokens are joined with one
/// space, byte runs are copied raw, decoding stops at EOS and the other
/// reserved ids render as nothing.
pub fn detokenize(vocab: &Vocab, ids: &[u32]) -> Result<Detokenized, TextError> {
    let mut buf: Vec<u8> = Vec::new();
    let mut prev_word = false;
    for &id in ids {
        match vocab.kind(id)? {
            TokenKind::Special(EOS) => break,
            TokenKind::Special(_) => {}
            TokenKind::Byte(b) => {
                buf.push(b);
                prev_word = false;
            }
            TokenKind::Word(w) => {
                if prev_word {
                    buf.push(b' ');
                }
                buf.extend_from_slice(w.as_bytes());
                prev_word = true;
            }
        }
    }
    Ok(match String::from_utf8(buf) {
        Ok(text) => Detokenized { text, lossy: false },
        Err(e) => Detokenized {
            text: String::from_utf8_lossy(e.as_bytes()).into_owned(),
            lossy: true,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimum_size() {
        assert!(matches!(build_vocab(["a"], 259), Err(TextError::Config(_))));
        let v = build_vocab(["a b c"], 260).unwrap();
        assert_eq!(v.len(), 260);
        assert!(v.learned().is_empty());
        assert_eq!(v.token(PAD), Some("<pad>"));
        assert_eq!(v.token(EMPTY_ALT), Some("<empty_alt>"));
        assert_eq!(v.token(BYTE_BASE + 0x41), Some("<0x41>"));
    }

    #[test]
    fn frequency_then_lexicographic() {
        let v = build_vocab(["a a b"], 262).unwrap();
        assert_eq!(v.learned(), ["a", "b"]);
        let v = build_vocab(["c b a c b"], 262).unwrap();
        assert_eq!(v.learned(), ["b", "c"]);
        // reserved spellings never become learned words
        let v = build_vocab(["<pad> <0x41> x"], 300).unwrap();
        assert_eq!(v.learned(), ["x"]);
    }

    #[test]
    fn deterministic_rebuild() {
        let texts = ["the owl sat", "the owl flew", "a cat"];
        assert_eq!(
            build_vocab(texts, 300).unwrap(),
            build_vocab(texts, 300).unwrap()
        );
    }

    #[test]
    fn tokenize_examples() {
        let v = build_vocab(["a b"], 262).unwrap();
        assert!(tokenize(&v, "").is_empty());
        let ia = v.word_id("a").unwrap();
        let ib = v.word_id("b").unwrap();
        assert_eq!(tokenize(&v, "a b"), vec![ia, ib]);

        let empty = build_vocab(Vec::<&str>::new(), 260).unwrap();
        let ids = tokenize(&empty, "iguana");
        let expected: Vec<u32> = "iguana".bytes().map(|b| BYTE_BASE + b as u32).collect();
        assert_eq!(ids, expected);
    }

    #[test]
    fn detokenize_contract() {
        let v = build_vocab(["a b"], 262).unwrap();
        assert_eq!(detokenize(&v, &[]).unwrap().text, "");
        let ia = v.word_id("a").unwrap();
        let ib = v.word_id("b").unwrap();
        assert_eq!(detokenize(&v, &[BOS, ia, ib, EOS, ia]).unwrap().text, "a b");
        assert!(matches!(
            detokenize(&v, &[9999]),
            Err(TextError::Range { id: 9999, .. })
        ));
        let bad = detokenize(&v, &[BYTE_BASE + 0xFF, ia]).unwrap();
        assert!(bad.lossy);
        assert_eq!(bad.text, "\u{FFFD}a");
    }

    #[test]
    fn save_load() {
        let v = build_vocab(["one two two three three three"], 270).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.jsonl");
        v.save(&p).unwrap();
        assert_eq!(Vocab::load(&p).unwrap(), v);
    }

    proptest! {
        #[test]
        fn round_trip_lossless(text in "\\PC*|[ab \t\n]{0,20}", words in proptest::collection::vec("[ab]{1,2}", 0..4)) {
            let corpus = words.join(" ");
            let v = build_vocab([corpus.as_str()], 300).unwrap();
            let ids = tokenize(&v, &text);
            let back = detokenize(&v, &ids).unwrap();
            prop_assert!(!back.lossy);
            prop_assert_eq!(back.text, text);
        }
    }
}
