use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

use super::distance::levenshtein;

/// Whether `c` belongs to a word: letters, digits, apostrophes, and combining
/// marks (Thai vowel and tone marks are marks, not letters).
pub(crate) fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
        || c == '\''
        || c.general_category_group() == GeneralCategoryGroup::Mark
}

/// Lowercases and drops punctuation, keeping word characters and whitespace.
pub fn normalize_text(s: &str) -> String {
    s.chars()
        .filter(|&c| is_word_char(c) || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect()
}

fn normalized(s: &str) -> Cow<'_, str> {
    if s.chars().all(|c| (is_word_char(c) && !c.is_uppercase()) || c.is_whitespace()) {
        Cow::Borrowed(s)
    } else {
        Cow::Owned(normalize_text(s))
    }
}

pub fn normalized_words(s: &str) -> Vec<String> {
    normalize_text(s)
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

/// Word error rate as an exact fraction: `edits / max(1, reference_words)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WerScore {
    pub edits: usize,
    pub reference_words: usize,
}

impl WerScore {
    pub fn value(&self) -> f64 {
        self.edits as f64 / self.reference_words.max(1) as f64
    }
}

pub fn word_edit_distance<S: AsRef<str>>(reference: &[S], hypothesis: &[S]) -> usize {
    let r: Vec<&str> = reference.iter().map(AsRef::as_ref).collect();
    let h: Vec<&str> = hypothesis.iter().map(AsRef::as_ref).collect();
    levenshtein(&r, &h)
}

/// Word-level edit distance divided by the reference length. Not capped at 1.
pub fn normalized_wer(reference: &str, hypothesis: &str) -> WerScore {
    let (r, h) = (normalized(reference), normalized(hypothesis));
    let r: Vec<&str> = r.split_whitespace().collect();
    let h: Vec<&str> = h.split_whitespace().collect();
    WerScore {
        edits: levenshtein(&r, &h),
        reference_words: r.len(),
    }
}
