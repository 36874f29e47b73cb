use std::collections::{HashMap, HashSet};

use super::{metric_tokens, MetricError};

pub const MAX_NGRAM: usize = 4;
/// Standard deviation of the Gaussian length penalty.
pub const CIDER_SIGMA: f64 = 6.0;

/// Document frequencies of n-grams (orders 1..=4) over a reference corpus,
/// where each document is one item's reference set.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramStats {
    doc_freq: [HashMap<String, usize>; MAX_NGRAM],
    n_docs: usize,
}

fn ngrams(tokens: &[String], n: usize) -> impl Iterator<Item = String> + '_ {
    tokens.windows(n).map(|w| w.join(" "))
}

impl NGramStats {
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// Number of documents containing the n-gram (words joined by spaces).
    pub fn doc_freq(&self, ngram: &str) -> usize {
        let n = ngram.split(' ').count();
        if n == 0 || n > MAX_NGRAM {
            return 0;
        }
        self.doc_freq[n - 1].get(ngram).copied().unwrap_or(0)
    }

    /// `log(N / df)`, with unseen n-grams treated as df = 1.
    pub fn idf(&self, ngram: &str) -> f64 {
        let df = self.doc_freq(ngram).max(1) as f64;
        (self.n_docs as f64).ln() - df.ln()
    }
}

/// Count document frequencies for every n-gram of order 1..=4.
pub fn build_ngram_stats<S: AsRef<str>>(
    reference_sets: &[Vec<S>],
) -> Result<NGramStats, MetricError> {
    if reference_sets.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let mut doc_freq: [HashMap<String, usize>; MAX_NGRAM] = Default::default();
    for doc in reference_sets {
        let token_lists: Vec<Vec<String>> = doc.iter().map(|r| metric_tokens(r.as_ref())).collect();
        for (n, table) in doc_freq.iter_mut().enumerate() {
            let present: HashSet<String> =
                token_lists.iter().flat_map(|t| ngrams(t, n + 1)).collect();
            for g in present {
                *table.entry(g).or_default() += 1;
            }
        }
    }
    Ok(NGramStats {
        doc_freq,
        n_docs: reference_sets.len(),
    })
}

struct TfIdf {
    weights: HashMap<String, f64>,
    norm: f64,
}

fn tfidf(tokens: &[String], n: usize, stats: &NGramStats) -> TfIdf {
    let mut counts: HashMap<String, f64> = HashMap::new();
    for g in ngrams(tokens, n) {
        *counts.entry(g).or_default() += 1.0;
    }
    let weights: HashMap<String, f64> = counts
        .into_iter()
        .map(|(g, tf)| {
            let w = tf * stats.idf(&g);
            (g, w)
        })
        .collect();
    // fixed summation order so results do not depend on hash iteration
    let mut sq: Vec<f64> = weights.values().map(|w| w * w).collect();
    sq.sort_by(f64::total_cmp);
    let norm = sq.iter().sum::<f64>().sqrt();
    TfIdf { weights, norm }
}

/// CIDEr-D with σ = 6, in [0, 10].
pub fn cider_d(
    candidate: &str,
    references: &[&str],
    stats: &NGramStats,
) -> Result<f64, MetricError> {
    cider_d_with_sigma(candidate, references, stats, CIDER_SIGMA)
}

/// CIDEr-D with an explicit length-penalty σ (`f64::INFINITY` disables the
/// penalty). For each order the clipped TF-IDF cosine against each reference
/// is scaled by `exp(−Δ²/(2σ²))`, where Δ is the word-count difference;
/// scores are averaged over references and orders and multiplied by 10.
pub fn cider_d_with_sigma(
    candidate: &str,
    references: &[&str],
    stats: &NGramStats,
    sigma: f64,
) -> Result<f64, MetricError> {
    if references.is_empty() {
        return Err(MetricError::Domain(
            "CIDEr-D needs at least one reference".into(),
        ));
    }
    let cand = metric_tokens(candidate);
    let refs: Vec<Vec<String>> = references.iter().map(|r| metric_tokens(r)).collect();
    let mut total = 0.0;
    for n in 1..=MAX_NGRAM {
        let h = tfidf(&cand, n, stats);
        let mut order_sum = 0.0;
        for r_tokens in &refs {
            let r = tfidf(r_tokens, n, stats);
            let mut terms: Vec<f64> = h
                .weights
                .iter()
                .filter_map(|(g, &hw)| r.weights.get(g).map(|&rw| hw.min(rw) * rw))
                .collect();
            terms.sort_by(f64::total_cmp);
            let dot: f64 = terms.iter().sum();
            let mut sim = if h.norm != 0.0 && r.norm != 0.0 {
                dot / (h.norm * r.norm)
            } else {
                0.0
            };
            let delta = cand.len() as f64 - r_tokens.len() as f64;
            sim *= (-(delta * delta) / (2.0 * sigma * sigma)).exp();
            order_sum += sim;
        }
        total += order_sum / refs.len() as f64;
    }
    Ok((total / MAX_NGRAM as f64 * 10.0).clamp(0.0, 10.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(texts: &[&str]) -> Vec<Vec<String>> {
        texts.iter().map(|t| vec![t.to_string()]).collect()
    }

    #[test]
    fn idf_examples() {
        let one = build_ngram_stats(&docs(&["a b c"])).unwrap();
        assert_eq!(one.idf("a"), 0.0);
        assert_eq!(one.idf("a b c"), 0.0);
        let two = build_ngram_stats(&docs(&["a b", "a c"])).unwrap();
        assert_eq!(two.idf("a"), 0.0);
        assert!((two.idf("b") - 2f64.ln()).abs() < 1e-15);
        assert_eq!(two.doc_freq("a"), 2);
        assert!(matches!(
            build_ngram_stats::<String>(&[]),
            Err(MetricError::EmptyCorpus)
        ));
    }

    #[test]
    fn no_overlap_is_zero() {
        let stats = build_ngram_stats(&docs(&["a b c", "d e f"])).unwrap();
        assert_eq!(cider_d("x y z", &["a b c"], &stats).unwrap(), 0.0);
    }

    #[test]
    fn own_reference_in_two_doc_corpus() {
        // every n-gram of "a b c" has df 1 of N = 2; identical vectors give
        // cosine 1 at orders 1-3, there are no 4-grams, no length penalty
        let stats = build_ngram_stats(&docs(&["a b c", "d e f"])).unwrap();
        let v = cider_d("a b c", &["a b c"], &stats).unwrap();
        assert!((v - 7.5).abs() < 1e-12, "{v}");
    }

    #[test]
    fn gaussian_length_penalty() {
        let stats = build_ngram_stats(&docs(&["a b c d e f", "g h i"])).unwrap();
        let cand = format!("a b c d e f {}", vec!["z"; 18].join(" "));
        let with = cider_d(&cand, &["a b c d e f"], &stats).unwrap();
        let without = cider_d_with_sigma(&cand, &["a b c d e f"], &stats, f64::INFINITY).unwrap();
        assert!(without > 0.0);
        assert!((with / without - (-4.5f64).exp()).abs() < 1e-12);
    }
}
