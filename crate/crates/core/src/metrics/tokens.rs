/// Word tokens for the n-gram metrics: lowercased whitespace-separated words
/// with surrounding punctuation trimmed; tokens that are pure punctuation are
/// dropped.
pub fn metric_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trims_punctuation() {
        assert_eq!(
            metric_tokens("A photo, of an Owl!  ..."),
            ["a", "photo", "of", "an", "owl"]
        );
        assert!(metric_tokens("  ").is_empty());
    }
}
