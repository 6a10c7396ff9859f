//! Turn execution: admission control, context assembly, retrieval, intent
//! routing and the staged pipeline that turns a user utterance into timed
//! agent audio.

mod gate;
mod intent;
mod rag;
mod store;
mod tier;
mod turn;

pub use gate::{Admission, Admitted, ConcurrencyGate, GateError, DEFAULT_GATE_CAPACITY};
pub use intent::{classify_intent, default_phatic_lexicon, route, IntentClass, RoutingPolicy};
pub use rag::{retrieve, RagChunk, RagConfig, RagError};
pub use store::{ConversationStore, Message, Prompt, Role};
pub use tier::{PipelineTier, TierName, TierStages};
pub use turn::{
    run_turn, PlannedChunk, StageTimeline, TurnError, TurnMetrics, TurnOutcome, TurnRequest,
    TurnSettings,
};
