use super::{metric_tokens, Scored};

/// Light suffix stemmer used for the second METEOR matching stage.
pub fn stem(word: &str) -> &str {
    let n = word.len();
    for (suffix, min_len) in [("ing", 6), ("ed", 5), ("es", 5), ("ly", 5), ("s", 4)] {
        if n >= min_len && word.ends_with(suffix) && word.is_char_boundary(n - suffix.len()) {
            if suffix == "s" && word.ends_with("ss") {
                continue;
            }
            return &word[..n - suffix.len()];
        }
    }
    word
}

/// One-to-one unigram alignment: each candidate word (left to right) takes
/// the unmatched reference position that extends the previous match when
/// possible, otherwise the first unmatched one.
fn align<F>(
    cand: &[String],
    refw: &[String],
    matched_c: &mut [Option<usize>],
    matched_r: &mut [bool],
    eq: F,
) where
    F: Fn(&str, &str) -> bool,
{
    for i in 0..cand.len() {
        if matched_c[i].is_some() {
            continue;
        }
        let follow = i
            .checked_sub(1)
            .and_then(|p| matched_c[p])
            .map(|j| j + 1)
            .filter(|&j| j < refw.len() && !matched_r[j] && eq(&cand[i], &refw[j]));
        let pick =
            follow.or_else(|| (0..refw.len()).find(|&j| !matched_r[j] && eq(&cand[i], &refw[j])));
        if let Some(j) = pick {
            matched_c[i] = Some(j);
            matched_r[j] = true;
        }
    }
}

/// METEOR without synonym resources: exact then stem matching,
/// `F_mean = 10PR / (R + 9P)`, fragmentation penalty
/// `0.5 · (chunks / matches)^3`.
pub fn meteor_lite(candidate: &str, reference: &str) -> Scored {
    let cand = metric_tokens(candidate);
    let refw = metric_tokens(reference);
    if cand.is_empty() || refw.is_empty() {
        return Scored::empty();
    }
    let mut matched_c = vec![None; cand.len()];
    let mut matched_r = vec![false; refw.len()];
    align(&cand, &refw, &mut matched_c, &mut matched_r, |a, b| a == b);
    align(&cand, &refw, &mut matched_c, &mut matched_r, |a, b| {
        stem(a) == stem(b)
    });

    let matches = matched_c.iter().flatten().count();
    if matches == 0 {
        return Scored::ok(0.0);
    }
    let mut chunks = 0;
    let mut prev: Option<(usize, usize)> = None;
    for (i, m) in matched_c.iter().enumerate() {
        match (m, prev) {
            (Some(j), Some((pi, pj))) if i == pi + 1 && *j == pj + 1 => prev = Some((i, *j)),
            (Some(j), _) => {
                chunks += 1;
                prev = Some((i, *j));
            }
            (None, _) => prev = None,
        }
    }
    let p = matches as f64 / cand.len() as f64;
    let r = matches as f64 / refw.len() as f64;
    let f_mean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (chunks as f64 / matches as f64).powi(3);
    Scored::ok(f_mean * (1.0 - penalty))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert!((meteor_lite("owl", "owl").value - 0.5).abs() < 1e-12);
        assert_eq!(meteor_lite("a b", "c d").value, 0.0);
        let v = meteor_lite("the cat sat", "the cat sat").value;
        assert!((v - (1.0 - 0.5 / 27.0)).abs() < 1e-12);
        assert!((v - 0.9815).abs() < 1e-4);
        assert!(meteor_lite("", "x").empty_input);
    }

    #[test]
    fn stem_stage_and_chunks() {
        // "dogs" ~ "dog" only through stemming
        let exact = meteor_lite("two dog", "two dog").value;
        let stemmed = meteor_lite("two dogs", "two dog").value;
        assert_eq!(exact, stemmed);
        // reordering splits one chunk into two
        assert!(
            meteor_lite("sat the cat", "the cat sat").value
                < meteor_lite("the cat sat", "the cat sat").value
        );
    }

    #[test]
    fn stemmer() {
        assert_eq!(stem("walking"), "walk");
        assert_eq!(stem("glass"), "glass");
        assert_eq!(stem("dogs"), "dog");
        assert_eq!(stem("is"), "is");
    }
}
