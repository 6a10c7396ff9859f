use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::repair::normalized_words;
use crate::time::SimDuration;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("top_k must be at least 1")]
pub struct RagError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RagChunk {
    pub doc_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RagConfig {
    pub documents: Vec<RagChunk>,
    pub top_k: usize,
    #[serde(rename = "retrieval_overhead_ms")]
    pub retrieval_overhead: SimDuration,
}

impl Default for RagConfig {
    fn default() -> Self {
        RagConfig {
            documents: Vec::new(),
            top_k: 1,
            retrieval_overhead: SimDuration::ZERO,
        }
    }
}

impl RagConfig {
    pub fn validate(&self) -> Result<(), RagError> {
        if self.top_k == 0 {
            Err(RagError)
        } else {
            Ok(())
        }
    }
}

/// Keyword retrieval. Documents are ranked by how many distinct query words
/// they contain; documents sharing no word are never returned. The cost is
/// the configured overhead regardless of the query.
pub fn retrieve(rag: &RagConfig, query: &str) -> (Vec<RagChunk>, SimDuration) {
    let query: BTreeSet<String> = normalized_words(query).into_iter().collect();
    let mut scored: Vec<(usize, &RagChunk)> = rag
        .documents
        .iter()
        .map(|doc| {
            let words: BTreeSet<String> = normalized_words(&doc.text).into_iter().collect();
            (query.intersection(&words).count(), doc)
        })
        .filter(|(overlap, _)| *overlap > 0)
        .collect();
    scored.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.doc_id.cmp(&b.1.doc_id)));
    let chunks = scored
        .into_iter()
        .take(rag.top_k)
        .map(|(_, d)| d.clone())
        .collect();
    (chunks, rag.retrieval_overhead)
}
