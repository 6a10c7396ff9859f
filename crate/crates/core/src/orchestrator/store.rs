use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::rag::RagChunk;
use crate::event::SessionId;
use crate::time::{SimDuration, VirtualTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Agent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub text: String,
    pub t: VirtualTime,
}

/// The text handed to the reasoning model, assembled by concatenation.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Prompt {
    pub history: Vec<Message>,
    pub chunks: Vec<RagChunk>,
    pub transcript: String,
}

impl Prompt {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for m in &self.history {
            let who = match m.role {
                Role::User => "user",
                Role::Agent => "agent",
            };
            out.push_str(&format!("{who}: {}\n", m.text));
        }
        for c in &self.chunks {
            out.push_str(&format!("[{}] {}\n", c.doc_id, c.text));
        }
        out.push_str("user: ");
        out.push_str(&self.transcript);
        out
    }
}

/// Per-session, append-only conversation history.
#[derive(Debug, Clone, Default)]
pub struct ConversationStore {
    histories: BTreeMap<SessionId, Vec<Message>>,
    pub fetch_latency: SimDuration,
}

impl ConversationStore {
    pub fn new(fetch_latency: SimDuration) -> Self {
        ConversationStore {
            histories: BTreeMap::new(),
            fetch_latency,
        }
    }

    pub fn history(&self, session: &SessionId) -> &[Message] {
        self.histories.get(session).map_or(&[], Vec::as_slice)
    }

    /// Builds the prompt for a new user turn. Costs `fetch_latency`.
    pub fn inject_context(
        &self,
        session: &SessionId,
        transcript: &str,
        chunks: Vec<RagChunk>,
    ) -> (Prompt, SimDuration) {
        let prompt = Prompt {
            history: self.history(session).to_vec(),
            chunks,
            transcript: transcript.to_owned(),
        };
        (prompt, self.fetch_latency)
    }

    /// Records a delivered exchange. Turns that never reach the user are
    /// never committed, so the history only holds complete pairs.
    pub fn commit_exchange(
        &mut self,
        session: &SessionId,
        user: (&str, VirtualTime),
        agent: (&str, VirtualTime),
    ) {
        let h = self.histories.entry(session.clone()).or_default();
        h.push(Message {
            role: Role::User,
            text: user.0.to_owned(),
            t: user.1,
        });
        h.push(Message {
            role: Role::Agent,
            text: agent.0.to_owned(),
            t: agent.1,
        });
    }
}
