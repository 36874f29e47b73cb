/// Recommended caption openings from the annotation guidelines.
pub const STARTING_PROMPTS: [&str; 11] = [
    "a photo of",
    "a product photo of",
    "a low resolution photo of",
    "a cropped photo of",
    "a close-up photo of",
    "a black and white photo of",
    "a blurry photo of",
    "a rendering of",
    "a sculpture of",
    "a painting of",
    "a cartoon of",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptCheck {
    Accepted(&'static str),
    Rejected,
}

impl PromptCheck {
    pub fn is_accepted(self) -> bool {
        matches!(self, PromptCheck::Accepted(_))
    }
}

/// Accept iff the text (leading whitespace ignored) starts with one of the
/// recommended prompts, case-insensitively. Plain prefix match, so any
/// extension of an accepted text is accepted too.
pub fn starting_prompt_check(text: &str) -> PromptCheck {
    let lowered = text.trim_start().to_lowercase();
    STARTING_PROMPTS
        .iter()
        .filter(|p| lowered.starts_with(*p))
        .max_by_key(|p| p.len())
        .map_or(PromptCheck::Rejected, |p| PromptCheck::Accepted(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(
            starting_prompt_check("A photo of a conch shell on the sand"),
            PromptCheck::Accepted("a photo of")
        );
        assert_eq!(
            starting_prompt_check("This is an image showing a dog"),
            PromptCheck::Rejected
        );
        assert_eq!(
            starting_prompt_check("This image shows a dog"),
            PromptCheck::Rejected
        );
        assert_eq!(starting_prompt_check(""), PromptCheck::Rejected);
        assert_eq!(
            starting_prompt_check("  A Close-Up Photo of a bee"),
            PromptCheck::Accepted("a close-up photo of")
        );
    }

    proptest! {
        #[test]
        fn prefix_monotone(x in "(A|a) (photo|painting|cartoon|dog) of[a-z ]{0,8}", suffix in "\\PC{0,16}") {
            if starting_prompt_check(&x).is_accepted() {
                let longer = format!("{x}{suffix}");
                prop_assert!(starting_prompt_check(&longer).is_accepted());
            }
        }
    }
}
