use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::rag::{retrieve, RagConfig};
use super::store::ConversationStore;
use super::tier::{PipelineTier, TierName, TierStages};
use crate::adapters::{
    cost_of_turn, playback_duration, sim_asr, sim_llm, sim_tts, AdapterError, CostModel,
    LlmMode, LlmSettings, Usd, Utterance, DEFAULT_SPEAKING_RATE,
};
use crate::aggregator::{chunk_stream, chunk_text, AggregatorError, ChunkPolicy, SpeechChunk};
use crate::event::SessionId;
use crate::floor::RequestId;
use crate::repair::{repair_transcript, PhraseSet, RepairConfig};
use crate::time::{SimDuration, VirtualTime};

#[derive(Debug, Error, PartialEq)]
pub enum TurnError {
    #[error("transcript is empty after the repair stage")]
    EmptyTranscript,
    #[error("response produced no speakable text")]
    NoAudio,
    #[error(transparent)]
    Chunking(#[from] AggregatorError),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurnRequest {
    pub session: SessionId,
    pub request_id: RequestId,
    pub turn_index: usize,
    /// What the user actually said; the ASR stage transcribes it.
    pub transcript: String,
    pub prosody: BTreeSet<String>,
    /// When the end of the user turn was detected.
    pub t_submitted: VirtualTime,
}

/// Per-turn accounting row. Durations are in milliseconds when serialized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnMetrics {
    pub session: SessionId,
    pub turn_index: usize,
    pub tier: TierName,
    pub queue_wait_ms: SimDuration,
    pub asr_ms: SimDuration,
    pub repair_ms: SimDuration,
    pub retrieval_ms: SimDuration,
    pub context_fetch_ms: SimDuration,
    pub llm_first_token_ms: Option<SimDuration>,
    pub llm_total_ms: SimDuration,
    pub tts_first_chunk_ms: SimDuration,
    pub turn_delay_ms: Option<SimDuration>,
    pub turn_end_ms: VirtualTime,
    pub first_audio_ms: Option<VirtualTime>,
    pub playback_end_ms: Option<VirtualTime>,
    pub filler_emitted: bool,
    pub canceled: bool,
    pub cost_usd: Usd,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TurnMetrics {
    pub fn new(session: SessionId, turn_index: usize, tier: TierName) -> Self {
        TurnMetrics {
            session,
            turn_index,
            tier,
            queue_wait_ms: SimDuration::ZERO,
            asr_ms: SimDuration::ZERO,
            repair_ms: SimDuration::ZERO,
            retrieval_ms: SimDuration::ZERO,
            context_fetch_ms: SimDuration::ZERO,
            llm_first_token_ms: None,
            llm_total_ms: SimDuration::ZERO,
            tts_first_chunk_ms: SimDuration::ZERO,
            turn_delay_ms: None,
            turn_end_ms: VirtualTime::ZERO,
            first_audio_ms: None,
            playback_end_ms: None,
            filler_emitted: false,
            canceled: false,
            cost_usd: Usd::ZERO,
            error: None,
        }
    }

    /// Sum of the recorded stage components up to the first audio.
    pub fn stage_sum(&self) -> SimDuration {
        self.queue_wait_ms
            + self.asr_ms
            + self.repair_ms
            + self.retrieval_ms
            + self.context_fetch_ms
            + self.llm_total_ms
            + self.tts_first_chunk_ms
    }
}

/// Absolute stage boundaries of one turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StageTimeline {
    pub turn_end: VirtualTime,
    pub admitted: VirtualTime,
    pub asr_done: VirtualTime,
    pub repair_done: VirtualTime,
    pub retrieval_done: VirtualTime,
    pub context_done: VirtualTime,
    pub llm_first_token: Option<VirtualTime>,
    pub llm_done: VirtualTime,
    pub first_chunk_emitted: VirtualTime,
    pub first_audio: VirtualTime,
    pub playback_end: VirtualTime,
}

/// One synthesized chunk on the output timeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlannedChunk {
    pub text: String,
    pub emitted: VirtualTime,
    pub ready: VirtualTime,
    pub play_start: VirtualTime,
    pub play_end: VirtualTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TurnOutcome {
    pub metrics: TurnMetrics,
    pub timeline: StageTimeline,
    pub chunks: Vec<PlannedChunk>,
    /// Transcript after ASR and repair.
    pub transcript: String,
    pub response: String,
}

/// Everything a turn needs besides the tier and the history.
#[derive(Debug, Clone, Copy)]
pub struct TurnSettings<'a> {
    pub phrase_set: &'a PhraseSet,
    pub repair: &'a RepairConfig,
    pub rag: &'a RagConfig,
    pub chunk_policy: &'a ChunkPolicy,
    pub llm: &'a LlmSettings,
    pub streaming: bool,
    pub costs: &'a CostModel,
}

/// Lays chunks out on the output timeline: synthesis is sequential and
/// playback of a chunk waits for both its audio and the previous chunk.
fn schedule_playback<R: Rng + ?Sized>(
    chunks: &[SpeechChunk],
    tts: &crate::adapters::ComponentProfile,
    rng: &mut R,
) -> Result<Vec<PlannedChunk>, TurnError> {
    let mut planned = Vec::with_capacity(chunks.len());
    let mut synth_free = VirtualTime::ZERO;
    let mut prev_end = VirtualTime::ZERO;
    for chunk in chunks {
        let text = chunk.text.trim();
        if text.is_empty() {
            continue;
        }
        let speakable = SpeechChunk {
            text: text.to_owned(),
            ..chunk.clone()
        };
        let audio = sim_tts(&speakable, tts, rng)?;
        let start = chunk.t_emitted.max(synth_free);
        let ready = start + audio.synthesis_latency;
        synth_free = ready;
        let play_start = ready.max(prev_end);
        let play_end = play_start + audio.playback_duration;
        prev_end = play_end;
        planned.push(PlannedChunk {
            text: speakable.text,
            emitted: chunk.t_emitted,
            ready,
            play_start,
            play_end,
        });
    }
    if planned.is_empty() {
        return Err(TurnError::NoAudio);
    }
    Ok(planned)
}

/// Executes one admitted turn. Stages run strictly in sequence from
/// `admitted_at`; the result is the full plan of the turn, which the caller
/// may still cancel before its audio starts.
pub fn run_turn<R: Rng + ?Sized>(
    req: &TurnRequest,
    tier: &PipelineTier,
    admitted_at: VirtualTime,
    store: &ConversationStore,
    settings: TurnSettings<'_>,
    rng: &mut R,
) -> Result<TurnOutcome, TurnError> {
    let mut m = TurnMetrics::new(req.session.clone(), req.turn_index, tier.name);
    m.cost_usd = cost_of_turn(tier.name, settings.costs)?;
    m.queue_wait_ms = admitted_at.since(req.t_submitted);
    m.turn_end_ms = req.t_submitted;

    let (asr, repair, llm, tts) = match &tier.stages {
        TierStages::Modular {
            asr,
            repair,
            llm,
            tts,
        } => (asr, repair.as_ref(), llm, tts),
        TierStages::Opaque { model } => {
            return run_opaque(req, model, admitted_at, m, settings, rng);
        }
    };

    let utterance = Utterance {
        text: req.transcript.clone(),
        prosody: req.prosody.clone(),
    };
    let heard = sim_asr(&utterance, asr, rng);
    m.asr_ms = heard.latency;
    let asr_done = admitted_at + m.asr_ms;

    let transcript = match repair {
        Some(profile) => {
            m.repair_ms = profile.latency.sample(rng);
            repair_transcript(&heard.text, settings.phrase_set, settings.repair).corrected
        }
        None => heard.text,
    };
    let repair_done = asr_done + m.repair_ms;
    if transcript.trim().is_empty() {
        return Err(TurnError::EmptyTranscript);
    }

    let (docs, overhead) = retrieve(settings.rag, &transcript);
    m.retrieval_ms = overhead;
    let retrieval_done = repair_done + overhead;
    let (prompt, fetch) = store.inject_context(&req.session, &transcript, docs);
    m.context_fetch_ms = fetch;
    let context_done = retrieval_done + fetch;

    let mode = if settings.streaming {
        LlmMode::Streaming
    } else {
        LlmMode::Batch
    };
    let response = sim_llm(&prompt, llm, settings.llm, rng, mode);
    m.llm_total_ms = response.total;
    m.llm_first_token_ms = response.first_token();
    let llm_done = context_done + response.total;

    let chunks = if settings.streaming {
        let tokens: Vec<_> = response
            .tokens
            .iter()
            .map(|t| {
                let mut t = t.clone();
                t.t = context_done + SimDuration::from_ticks(t.t.ticks());
                t
            })
            .collect();
        chunk_stream(&tokens, llm_done, settings.chunk_policy)?
    } else {
        chunk_text(&response.text, settings.chunk_policy)?
            .into_iter()
            .map(|c| SpeechChunk {
                t_emitted: llm_done,
                ..c
            })
            .collect()
    };
    let planned = schedule_playback(&chunks, tts, rng)?;
    let first = &planned[0];
    m.tts_first_chunk_ms = first.play_start.since(first.emitted);
    m.turn_delay_ms = Some(first.play_start.since(req.t_submitted));
    m.first_audio_ms = Some(first.play_start);
    let playback_end = planned.last().map_or(first.play_end, |c| c.play_end);
    m.playback_end_ms = Some(playback_end);

    Ok(TurnOutcome {
        timeline: StageTimeline {
            turn_end: req.t_submitted,
            admitted: admitted_at,
            asr_done,
            repair_done,
            retrieval_done,
            context_done,
            llm_first_token: m.llm_first_token_ms.map(|d| context_done + d),
            llm_done,
            first_chunk_emitted: first.emitted,
            first_audio: first.play_start,
            playback_end,
        },
        metrics: m,
        chunks: planned,
        transcript,
        response: response.text,
    })
}

fn run_opaque<R: Rng + ?Sized>(
    req: &TurnRequest,
    model: &crate::adapters::ComponentProfile,
    admitted_at: VirtualTime,
    mut m: TurnMetrics,
    settings: TurnSettings<'_>,
    rng: &mut R,
) -> Result<TurnOutcome, TurnError> {
    let total = model.latency.sample(rng);
    let text = settings.llm.fallback_text.clone();
    let rate = model.speaking_rate.unwrap_or(DEFAULT_SPEAKING_RATE);
    let first_audio = admitted_at + total;
    let playback_end = first_audio + playback_duration(text.chars().count(), rate);
    m.llm_total_ms = total;
    m.turn_delay_ms = Some(first_audio.since(req.t_submitted));
    m.first_audio_ms = Some(first_audio);
    m.playback_end_ms = Some(playback_end);
    Ok(TurnOutcome {
        timeline: StageTimeline {
            turn_end: req.t_submitted,
            admitted: admitted_at,
            asr_done: admitted_at,
            repair_done: admitted_at,
            retrieval_done: admitted_at,
            context_done: admitted_at,
            llm_first_token: None,
            llm_done: first_audio,
            first_chunk_emitted: first_audio,
            first_audio,
            playback_end,
        },
        metrics: m,
        chunks: vec![PlannedChunk {
            text: text.clone(),
            emitted: first_audio,
            ready: first_audio,
            play_start: first_audio,
            play_end: playback_end,
        }],
        transcript: req.transcript.clone(),
        response: text,
    })
}
