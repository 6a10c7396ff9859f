//! Textual repair layer.
//!
//! A deterministic phrase-set matcher that restores code-switched jargon a
//! fast ASR turned into phonetic transliterations, plus the word error rate
//! and exact-match correction score used to evaluate it.
//!
//! Matching scans token n-grams left to right. At each position every window
//! of 1..=`max_window_tokens` tokens is compared against every variant; an
//! n-gram matches when its character edit distance divided by the variant
//! length is within `max_norm_edit_distance`. Among matches starting at the
//! same token the longest span wins, then the smallest distance, then the
//! earlier phrase-set entry (and variant). Text outside matched spans is
//! copied byte for byte.

pub mod distance;
pub mod wer;

use std::collections::HashSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimDuration;
pub use distance::{char_distance, levenshtein};
pub use wer::{normalize_text, normalized_wer, normalized_words, word_edit_distance, WerScore};

#[derive(Debug, Error, PartialEq)]
pub enum RepairError {
    #[error("duplicate canonical term {0:?}")]
    DuplicateCanonical(String),
    #[error("variant of {0:?} equals its canonical form")]
    VariantIsCanonical(String),
    #[error("empty variant for {0:?}")]
    EmptyVariant(String),
    #[error("max_window_tokens {window} is shorter than variant {variant:?}")]
    WindowTooSmall { window: usize, variant: String },
    #[error("max_norm_edit_distance must be within [0, 1]")]
    BadThreshold,
    #[error("correction score needs a non-empty test set")]
    EmptyTestSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseEntry {
    pub canonical: String,
    pub variants: Vec<String>,
}

impl PhraseEntry {
    pub fn new(canonical: &str, variants: &[&str]) -> Self {
        PhraseEntry {
            canonical: canonical.to_owned(),
            variants: variants.iter().map(|v| (*v).to_owned()).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhraseSet {
    pub entries: Vec<PhraseEntry>,
}

impl PhraseSet {
    pub fn new(entries: Vec<PhraseEntry>) -> Result<Self, RepairError> {
        let ps = PhraseSet { entries };
        ps.validate()?;
        Ok(ps)
    }

    pub fn validate(&self) -> Result<(), RepairError> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.canonical.as_str()) {
                return Err(RepairError::DuplicateCanonical(e.canonical.clone()));
            }
            for v in &e.variants {
                if v.trim().is_empty() {
                    return Err(RepairError::EmptyVariant(e.canonical.clone()));
                }
                if v == &e.canonical {
                    return Err(RepairError::VariantIsCanonical(e.canonical.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn canonicals(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.canonical.as_str())
    }

    fn longest_variant_tokens(&self) -> Option<(&str, usize)> {
        self.entries
            .iter()
            .flat_map(|e| e.variants.iter())
            .map(|v| (v.as_str(), v.split_whitespace().count()))
            .max_by_key(|(_, n)| *n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepairConfig {
    pub max_norm_edit_distance: f64,
    #[serde(rename = "latency_ms")]
    pub latency: SimDuration,
    pub max_window_tokens: usize,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            max_norm_edit_distance: 0.2,
            latency: SimDuration::from_ticks(6230),
            max_window_tokens: 5,
        }
    }
}

impl RepairConfig {
    pub fn validate(&self, ps: &PhraseSet) -> Result<(), RepairError> {
        if !(0.0..=1.0).contains(&self.max_norm_edit_distance) {
            return Err(RepairError::BadThreshold);
        }
        if let Some((variant, n)) = ps.longest_variant_tokens() {
            if n > self.max_window_tokens {
                return Err(RepairError::WindowTooSmall {
                    window: self.max_window_tokens,
                    variant: variant.to_owned(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    /// Token index range in the input.
    pub tokens: Range<usize>,
    pub variant: String,
    pub canonical: String,
    pub distance: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairResult {
    pub corrected: String,
    pub substitutions: Vec<Substitution>,
    #[serde(rename = "latency_ms")]
    pub latency: SimDuration,
}

/// A whitespace-delimited token with its punctuation-stripped core.
#[derive(Debug, Clone)]
pub(crate) struct Token {
    /// Byte range of the core (token minus leading/trailing punctuation).
    pub core: Range<usize>,
}

fn is_edge_punct(c: char) -> bool {
    !wer::is_word_char(c)
}

pub(crate) fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices().chain(std::iter::once((text.len(), ' '))) {
        match (start, c.is_whitespace()) {
            (None, false) => start = Some(i),
            (Some(s), true) => {
                let raw = &text[s..i];
                let lead = raw.len() - raw.trim_start_matches(is_edge_punct).len();
                let trail = raw.len() - raw.trim_end_matches(is_edge_punct).len();
                let core = if lead + trail >= raw.len() {
                    s..s
                } else {
                    s + lead..i - trail
                };
                out.push(Token { core });
                start = None;
            }
            _ => {}
        }
    }
    out
}

fn fold(s: &str) -> Vec<char> {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .chars()
        .flat_map(char::to_lowercase)
        .collect()
}

struct PreparedVariant<'a> {
    variant: &'a str,
    canonical: &'a str,
    chars: Vec<char>,
}

fn prepare(ps: &PhraseSet) -> Vec<PreparedVariant<'_>> {
    ps.entries
        .iter()
        .flat_map(|e| {
            e.variants.iter().map(move |v| PreparedVariant {
                variant: v,
                canonical: &e.canonical,
                chars: fold(v),
            })
        })
        .collect()
}

/// Lowercased n-gram of token cores joined by single spaces. `None` when the
/// window starts or ends on a punctuation-only token.
fn ngram_chars(text: &str, tokens: &[Token]) -> Option<Vec<char>> {
    let first = tokens.first()?;
    let last = tokens.last()?;
    if first.core.is_empty() || last.core.is_empty() {
        return None;
    }
    let joined: Vec<&str> = tokens
        .iter()
        .filter(|t| !t.core.is_empty())
        .map(|t| &text[t.core.clone()])
        .collect();
    Some(joined.join(" ").chars().flat_map(char::to_lowercase).collect())
}

pub fn repair_transcript(text: &str, ps: &PhraseSet, cfg: &RepairConfig) -> RepairResult {
    let tokens = tokenize(text);
    let variants = prepare(ps);
    let mut substitutions = Vec::new();
    let mut corrected = String::with_capacity(text.len());
    let mut copied_to = 0;

    let mut i = 0;
    while i < tokens.len() && !variants.is_empty() {
        // (span, distance, variant index)
        let mut best: Option<(usize, usize, usize)> = None;
        for w in (1..=cfg.max_window_tokens.min(tokens.len() - i)).rev() {
            if best.is_some() {
                break; // a longer span already matched
            }
            let Some(gram) = ngram_chars(text, &tokens[i..i + w]) else {
                continue;
            };
            for (vi, v) in variants.iter().enumerate() {
                let budget = cfg.max_norm_edit_distance * v.chars.len() as f64;
                if (gram.len().abs_diff(v.chars.len()) as f64) > budget + 1e-9 {
                    continue;
                }
                let d = levenshtein(&gram, &v.chars);
                if (d as f64) > budget + 1e-9 {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((_, bd, bvi)) => d < bd || (d == bd && vi < bvi),
                };
                if better {
                    best = Some((w, d, vi));
                }
            }
        }
        match best {
            Some((w, d, vi)) => {
                let v = &variants[vi];
                let span = tokens[i].core.start..tokens[i + w - 1].core.end;
                corrected.push_str(&text[copied_to..span.start]);
                corrected.push_str(v.canonical);
                copied_to = span.end;
                substitutions.push(Substitution {
                    tokens: i..i + w,
                    variant: v.variant.to_owned(),
                    canonical: v.canonical.to_owned(),
                    distance: d,
                });
                i += w;
            }
            None => i += 1,
        }
    }
    corrected.push_str(&text[copied_to..]);

    RepairResult {
        corrected,
        substitutions,
        latency: cfg.latency,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionScore {
    pub correct: usize,
    pub total: usize,
}

impl CorrectionScore {
    pub fn value(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

/// Fraction of `(corrupted, gold)` items whose repaired text equals gold
/// under WER normalization.
pub fn correction_score<S: AsRef<str>>(
    testset: &[(S, S)],
    ps: &PhraseSet,
    cfg: &RepairConfig,
) -> Result<CorrectionScore, RepairError> {
    if testset.is_empty() {
        return Err(RepairError::EmptyTestSet);
    }
    let correct = testset
        .iter()
        .filter(|(corrupted, gold)| {
            let fixed = repair_transcript(corrupted.as_ref(), ps, cfg).corrected;
            normalized_words(&fixed) == normalized_words(gold.as_ref())
        })
        .count();
    Ok(CorrectionScore {
        correct,
        total: testset.len(),
    })
}
