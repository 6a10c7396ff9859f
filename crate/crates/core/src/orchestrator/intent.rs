use serde::{Deserialize, Serialize};

use super::TierName;
use crate::repair::normalized_words;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentClass {
    /// Social small talk.
    Phatic,
    /// Information seeking.
    Epistemic,
}

pub fn default_phatic_lexicon() -> Vec<String> {
    [
        "hello", "hi", "hey", "thanks", "thank you", "bye", "goodbye", "good morning",
        "good afternoon", "good evening", "ok", "okay", "yes", "no", "sure", "great",
        "how are you", "nice to meet you", "see you",
    ]
    .map(String::from)
    .to_vec()
}

/// Phatic when the normalized transcript equals a lexicon entry, or has at
/// most two words that are each an entry. Empty input is phatic.
pub fn classify_intent(transcript: &str, lexicon: &[String]) -> IntentClass {
    let words = normalized_words(transcript);
    let entries: Vec<String> = lexicon.iter().map(|e| normalized_words(e).join(" ")).collect();
    let joined = words.join(" ");
    let phatic = words.is_empty()
        || entries.contains(&joined)
        || (words.len() <= 2 && words.iter().all(|w| entries.contains(w)));
    if phatic {
        IntentClass::Phatic
    } else {
        IntentClass::Epistemic
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoutingPolicy {
    pub phatic: TierName,
    pub epistemic: TierName,
}

impl Default for RoutingPolicy {
    fn default() -> Self {
        RoutingPolicy {
            phatic: TierName::Fluid,
            epistemic: TierName::Precise,
        }
    }
}

pub fn route(intent: IntentClass, policy: &RoutingPolicy) -> TierName {
    match intent {
        IntentClass::Phatic => policy.phatic,
        IntentClass::Epistemic => policy.epistemic,
    }
}
