use std::collections::BTreeSet;
use std::fmt;

use super::{Lexicon, Pos};

/// A normalized noun phrase: lowercased, leading determiner dropped and the
/// head noun's plural folded.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NounPhrase(String);

impl NounPhrase {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NounPhrase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Det,
    Adj,
    Noun,
    Break,
}

fn classify(lex: &Lexicon, word: Option<&str>) -> Class {
    let Some(word) = word else {
        return Class::Break;
    };
    let tags = lex.tags(word);
    if tags.contains(&Pos::Det) {
        Class::Det
    } else if tags.contains(&Pos::Pron) || tags.contains(&Pos::Adp) {
        Class::Break
    } else if tags.contains(&Pos::Noun) {
        Class::Noun
    } else if tags.contains(&Pos::Adj) {
        Class::Adj
    } else {
        Class::Break
    }
}

/// Split into lowercase words; any other non-space character is a
/// punctuation token (`None`) that ends a chunk.
fn word_tokens(text: &str) -> Vec<Option<String>> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let flush = |cur: &mut String, out: &mut Vec<Option<String>>| {
        if !cur.is_empty() {
            out.push(Some(std::mem::take(cur)));
        }
    };
    for c in text.chars() {
        if c.is_alphanumeric() || ((c == '-' || c == '\'') && !cur.is_empty()) {
            cur.extend(c.to_lowercase());
        } else {
            flush(&mut cur, &mut out);
            if !c.is_whitespace() {
                out.push(None);
            }
        }
    }
    flush(&mut cur, &mut out);
    // trailing hyphens/apostrophes belong to punctuation, not the word
    for w in out.iter_mut().flatten() {
        while w.ends_with(['-', '\'']) {
            w.pop();
        }
    }
    out
}

fn fold_plural(lex: &Lexicon, word: &str) -> String {
    match word.strip_suffix('s') {
        Some(stem) if !stem.is_empty() && lex.is_listed_noun(stem) => stem.to_string(),
        _ => word.to_string(),
    }
}

/// Chunk `text` with the pattern `DET? (ADJ|NOUN)* NOUN` and return the set
/// of normalized phrases.
pub fn noun_phrases(text: &str, lex: &Lexicon) -> BTreeSet<NounPhrase> {
    let tokens = word_tokens(text);
    let classes: Vec<Class> = tokens.iter().map(|t| classify(lex, t.as_deref())).collect();
    let mut out = BTreeSet::new();
    let mut i = 0;
    while i < tokens.len() {
        let start = if classes[i] == Class::Det { i + 1 } else { i };
        let mut end = start;
        let mut last_noun = None;
        while end < tokens.len() && matches!(classes[end], Class::Adj | Class::Noun) {
            if classes[end] == Class::Noun {
                last_noun = Some(end);
            }
            end += 1;
        }
        match last_noun {
            Some(head) => {
                let mut words: Vec<String> =
                    tokens[start..=head].iter().flatten().cloned().collect();
                if let Some(last) = words.last_mut() {
                    *last = fold_plural(lex, last);
                }
                out.insert(NounPhrase(words.join(" ")));
                i = head + 1;
            }
            None => i = end.max(i + 1),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nps(text: &str) -> Vec<String> {
        noun_phrases(text, &Lexicon::default_english())
            .into_iter()
            .map(|p| p.0)
            .collect()
    }

    #[test]
    fn examples() {
        assert!(nps("").is_empty());
        assert_eq!(nps("a dog is walking in the park"), ["dog", "park"]);
        assert_eq!(
            nps("great gray owl, Strix nebulosa"),
            ["great gray owl", "strix nebulosa"]
        );
    }

    #[test]
    fn plural_folding_and_dedup() {
        assert_eq!(nps("two dogs and a dog"), ["dog", "two dog"]);
        assert_eq!(nps("The dogs. The dog."), ["dog"]);
        // "glas" is not a listed noun, so no folding
        assert_eq!(nps("a glass"), ["glass"]);
    }

    #[test]
    fn adjective_only_runs_yield_nothing() {
        assert!(nps("very big and red").is_empty());
        assert_eq!(nps("a photo of a red car"), ["photo", "red car"]);
    }

    #[test]
    fn phrases_are_trimmed_and_nonempty() {
        for p in noun_phrases(
            "  a  photo  of\tthe   sea ,, -- ' x'  ",
            &Lexicon::default_english(),
        ) {
            assert!(!p.as_str().is_empty());
            assert_eq!(p.as_str().trim(), p.as_str());
        }
    }
}
