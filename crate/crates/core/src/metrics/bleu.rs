use std::collections::HashMap;

use super::{metric_tokens, Scored};

/// BLEU-1: clipped unigram precision times the brevity penalty
/// `exp(1 − r/c)` when the candidate is shorter than the closest reference
/// length `r` (ties go to the shorter reference).
pub fn bleu1(candidate: &str, references: &[&str]) -> Scored {
    let cand = metric_tokens(candidate);
    let refs: Vec<Vec<String>> = references.iter().map(|r| metric_tokens(r)).collect();
    if cand.is_empty() || refs.iter().all(Vec::is_empty) {
        return Scored::empty();
    }

    let mut max_ref: HashMap<&str, usize> = HashMap::new();
    for r in &refs {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for w in r {
            *counts.entry(w).or_default() += 1;
        }
        for (w, c) in counts {
            let e = max_ref.entry(w).or_default();
            *e = (*e).max(c);
        }
    }
    let mut cand_counts: HashMap<&str, usize> = HashMap::new();
    for w in &cand {
        *cand_counts.entry(w).or_default() += 1;
    }
    let clipped: usize = cand_counts
        .iter()
        .map(|(w, &c)| c.min(max_ref.get(w).copied().unwrap_or(0)))
        .sum();

    let c = cand.len();
    let r = refs
        .iter()
        .map(Vec::len)
        .min_by_key(|&len| (len.abs_diff(c), len))
        .unwrap_or(0);
    let bp = if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    };
    Scored::ok(bp * clipped as f64 / c as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(bleu1("a b c", &["a b c"]).value, 1.0);
        assert_eq!(bleu1("a b c d", &["a b x y"]).value, 0.5);
        let v = bleu1("a", &["a b"]).value;
        assert!((v - (-1.0f64).exp()).abs() < 1e-12);
        assert!((v - 0.3679).abs() < 1e-4);
    }

    #[test]
    fn clipping_and_empty() {
        // "the" appears twice in the candidate but once in the reference
        assert_eq!(bleu1("the the", &["the cat"]).value, 0.5);
        let e = bleu1("", &["a"]);
        assert!(e.empty_input);
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn closest_reference_length() {
        // c = 2: refs of length 3 and 1 are equally close; the shorter wins, BP = 1
        let v = bleu1("a b", &["a b c", "a"]).value;
        assert_eq!(v, 1.0);
        let swapped = bleu1("a b", &["a", "a b c"]).value;
        assert_eq!(v, swapped);
    }
}
