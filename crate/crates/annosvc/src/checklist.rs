use std::collections::BTreeMap;

use serde::Serialize;

/// One guideline step the annotator must confirm before submitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChecklistItem {
    pub key: &'static str,
    pub label: &'static str,
}

/// The eight annotation guideline steps, in the order they are performed.
pub const CHECKLIST: [ChecklistItem; 8] = [
    ChecklistItem {
        key: "copy-previous",
        label: "Copied the previous caption into the editor as the starting point",
    },
    ChecklistItem {
        key: "starting-prompt",
        label: "Caption opens with a recommended starting prompt",
    },
    ChecklistItem {
        key: "alt-usage",
        label: "Kept alt-text details that are visible in the image, such as names and places",
    },
    ChecklistItem {
        key: "hallucination-removal",
        label: "Removed details that are not in the image",
    },
    ChecklistItem {
        key: "theme-removal",
        label: "Removed subjective themes, moods and interpretations",
    },
    ChecklistItem {
        key: "people-policy",
        label: "Did not name or identify any person",
    },
    ChecklistItem {
        key: "missing-details",
        label: "Added important visible details that were missing",
    },
    ChecklistItem {
        key: "structure-check",
        label: "Caption goes from the main subject to background and context",
    },
];

/// Keys that are absent, false, or not part of the checklist, in template
/// order followed by unknown keys in sorted order.
pub fn unmet_keys(answers: &BTreeMap<String, bool>) -> Vec<String> {
    let mut out: Vec<String> = CHECKLIST
        .iter()
        .filter(|c| answers.get(c.key) != Some(&true))
        .map(|c| c.key.to_string())
        .collect();
    out.extend(
        answers
            .keys()
            .filter(|k| !CHECKLIST.iter().any(|c| c.key == k.as_str()))
            .cloned(),
    );
    out
}

/// A checklist with every step confirmed.
pub fn complete() -> BTreeMap<String, bool> {
    CHECKLIST
        .iter()
        .map(|c| (c.key.to_string(), true))
        .collect()
}
