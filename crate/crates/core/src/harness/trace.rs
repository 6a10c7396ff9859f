use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::SessionId;
use crate::time::{SimDuration, VirtualTime};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("cannot read trace: {0}")]
    Io(String),
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TraceKind {
    /// One VAD frame. Optional `text` is what the user said during it.
    Frame {
        vad_raw: f64,
        #[serde(default = "one")]
        gain: f64,
        #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
        prosody: BTreeSet<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        text: Option<String>,
    },
    /// An already-endpointed stretch of user speech.
    Utterance {
        text: String,
        duration_ms: SimDuration,
        #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
        prosody: BTreeSet<String>,
    },
    /// User speech expected to overlap agent output.
    BargeIn {
        text: String,
        #[serde(default)]
        duration_ms: SimDuration,
    },
    End,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t_ms: VirtualTime,
    pub session: SessionId,
    #[serde(flatten)]
    pub kind: TraceKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SessionKind {
    Frames,
    Speech,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn sessions(&self) -> BTreeSet<&SessionId> {
        self.events.iter().map(|e| &e.session).collect()
    }

    pub fn is_frame_session(&self, session: &SessionId) -> bool {
        self.events
            .iter()
            .any(|e| &e.session == session && matches!(e.kind, TraceKind::Frame { .. }))
    }

    pub fn to_jsonl(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).expect("trace events serialize") + "\n")
            .collect()
    }
}

pub fn parse_trace(text: &str) -> Result<Trace, TraceError> {
    struct Seen {
        last: VirtualTime,
        kind: Option<SessionKind>,
        ended: bool,
    }
    let mut seen: BTreeMap<SessionId, Seen> = BTreeMap::new();
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |msg: String| TraceError::Line { line, msg };
        if raw.trim().is_empty() {
            continue;
        }
        let ev: TraceEvent = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
        let kind = match ev.kind {
            TraceKind::Frame { .. } => Some(SessionKind::Frames),
            TraceKind::Utterance { .. } | TraceKind::BargeIn { .. } => Some(SessionKind::Speech),
            TraceKind::End => None,
        };
        let s = seen.entry(ev.session.clone()).or_insert(Seen {
            last: ev.t_ms,
            kind,
            ended: false,
        });
        if s.ended {
            return Err(err(format!("session {} continues after its end event", ev.session)));
        }
        if ev.t_ms < s.last {
            return Err(err(format!(
                "time regression in session {}: {} after {}",
                ev.session, ev.t_ms, s.last
            )));
        }
        match (s.kind, kind) {
            (Some(a), Some(b)) if a != b => {
                return Err(err(format!(
                    "session {} mixes frame and utterance events",
                    ev.session
                )))
            }
            (None, Some(_)) => s.kind = kind,
            _ => {}
        }
        s.last = ev.t_ms;
        s.ended = kind.is_none();
        events.push(ev);
    }
    Ok(Trace { events })
}

pub fn load_trace(path: &Path) -> Result<Trace, TraceError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| TraceError::Io(format!("{}: {e}", path.display())))?;
    parse_trace(&text)
}
