use super::{metric_tokens, Scored};

/// Longest common subsequence length (two-row DP).
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 against the best-matching reference.
pub fn rouge_l(candidate: &str, references: &[&str]) -> Scored {
    let cand = metric_tokens(candidate);
    let refs: Vec<Vec<String>> = references
        .iter()
        .map(|r| metric_tokens(r))
        .filter(|r| !r.is_empty())
        .collect();
    if cand.is_empty() || refs.is_empty() {
        return Scored::empty();
    }
    let best = refs
        .iter()
        .map(|r| {
            let l = lcs_len(&cand, r) as f64;
            if l == 0.0 {
                return 0.0;
            }
            let p = l / cand.len() as f64;
            let rec = l / r.len() as f64;
            2.0 * p * rec / (p + rec)
        })
        .fold(0.0, f64::max);
    Scored::ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(rouge_l("a b c", &["a b c"]).value, 1.0);
        assert_eq!(rouge_l("a b", &["c d"]).value, 0.0);
        assert!((rouge_l("a b c d", &["a c d e"]).value - 0.75).abs() < 1e-12);
        assert!(rouge_l("", &["a"]).empty_input);
    }

    #[test]
    fn lcs() {
        assert_eq!(lcs_len(b"abcd", b"acde"), 3);
        assert_eq!(lcs_len::<u8>(b"", b"abc"), 0);
    }
}
