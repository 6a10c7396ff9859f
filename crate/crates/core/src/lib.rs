//! Deterministic simulation of a cascaded speech agent: voice activity
//! detection, floor management, transcript repair, response chunking and
//! staged ASR / LLM / TTS execution, all on a virtual clock.

pub mod adapters;
pub mod aggregator;
pub mod event;
pub mod floor;
pub mod harness;
pub mod hearing;
pub mod orchestrator;
pub mod repair;
pub mod time;
