//! Session-level turn-taking state machine.
//!
//! Covers the half-duplex output gate (user speech during playback is
//! discarded), the optional full-duplex barge-in mode, the filler policy for
//! long processing silences, and what happens when the user speaks while a
//! request is still being processed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::SessionId;
use crate::hearing::{FloorSignal, SignalKind};
use crate::time::{SimDuration, VirtualTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RequestId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlaybackId(pub u64);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FloorError {
    #[error("session {session}: {signal:?} is not valid in phase {phase}")]
    Alternation {
        session: SessionId,
        signal: SignalKind,
        phase: &'static str,
    },
    #[error("signal for session {got} delivered to session {expected}")]
    WrongSession { expected: SessionId, got: SessionId },
    #[error("session {0}: no pending request to cancel")]
    NoPendingRequest(SessionId),
    #[error("session {session}: response for {request:?} does not match the pending request")]
    StaleResponse {
        session: SessionId,
        request: RequestId,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum FloorPhase {
    Idle,
    UserTurn,
    Processing {
        request: RequestId,
        entered_at: VirtualTime,
    },
    AgentTurn {
        playback: PlaybackId,
        started_at: VirtualTime,
    },
}

impl FloorPhase {
    pub fn name(&self) -> &'static str {
        match self {
            FloorPhase::Idle => "idle",
            FloorPhase::UserTurn => "user_turn",
            FloorPhase::Processing { .. } => "processing",
            FloorPhase::AgentTurn { .. } => "agent_turn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DuplexMode {
    #[default]
    HalfDuplex,
    FullDuplexBargeIn {
        #[serde(rename = "interrupt_latency_ms")]
        interrupt_latency: SimDuration,
    },
}


#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FillerPolicy {
    pub enabled: bool,
    #[serde(rename = "silence_threshold_ms")]
    pub silence_threshold: SimDuration,
    #[serde(rename = "filler_duration_ms")]
    pub filler_duration: SimDuration,
    pub repeat: bool,
}

impl Default for FillerPolicy {
    fn default() -> Self {
        FillerPolicy {
            enabled: true,
            silence_threshold: SimDuration::from_ms(3000),
            filler_duration: SimDuration::from_ms(800),
            repeat: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessingSpeechPolicy {
    #[default]
    CancelAndRestart,
    QueueAsFollowUp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FloorConfig {
    pub duplex: DuplexMode,
    pub processing_speech: ProcessingSpeechPolicy,
    pub filler: FillerPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FloorAction {
    DispatchTurn { request: RequestId },
    Ignored,
    HaltPlayback { playback: PlaybackId, at: VirtualTime },
    EmitFiller { at: VirtualTime },
    CancelRequest { request: RequestId },
    StartPlayback { playback: PlaybackId, request: RequestId },
    PlaybackDone { playback: PlaybackId },
}

/// What happened to user speech that did not open a turn; decides how its
/// closing `TurnEnd` is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shadowed {
    Ignored,
    Buffered,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FloorState {
    pub session: SessionId,
    pub phase: FloorPhase,
    next_request: u64,
    next_playback: u64,
    shadowed: Option<Shadowed>,
    follow_up_pending: bool,
    /// Start of the most recent filler in the current processing phase.
    filler_started: Option<VirtualTime>,
}

impl FloorState {
    pub fn new(session: SessionId) -> Self {
        FloorState {
            session,
            phase: FloorPhase::Idle,
            next_request: 0,
            next_playback: 0,
            shadowed: None,
            follow_up_pending: false,
            filler_started: None,
        }
    }

    pub fn has_follow_up(&self) -> bool {
        self.follow_up_pending
    }

    pub fn pending_request(&self) -> Option<RequestId> {
        match self.phase {
            FloorPhase::Processing { request, .. } => Some(request),
            _ => None,
        }
    }

    fn alternation(&self, signal: SignalKind) -> FloorError {
        FloorError::Alternation {
            session: self.session.clone(),
            signal,
            phase: self.phase.name(),
        }
    }

    fn dispatch(&mut self, now: VirtualTime) -> FloorAction {
        let request = RequestId(self.next_request);
        self.next_request += 1;
        self.phase = FloorPhase::Processing {
            request,
            entered_at: now,
        };
        self.filler_started = None;
        FloorAction::DispatchTurn { request }
    }

    pub fn on_floor_signal(
        &mut self,
        signal: &FloorSignal,
        cfg: &FloorConfig,
    ) -> Result<Vec<FloorAction>, FloorError> {
        if signal.session != self.session {
            return Err(FloorError::WrongSession {
                expected: self.session.clone(),
                got: signal.session.clone(),
            });
        }
        match signal.kind {
            SignalKind::TurnStart => {
                if self.shadowed.is_some() {
                    return Err(self.alternation(SignalKind::TurnStart));
                }
                match self.phase {
                    FloorPhase::Idle => {
                        self.phase = FloorPhase::UserTurn;
                        Ok(Vec::new())
                    }
                    FloorPhase::UserTurn => Err(self.alternation(SignalKind::TurnStart)),
                    FloorPhase::Processing { .. } => {
                        self.on_user_speech_during_processing(signal.t, cfg.processing_speech)
                    }
                    FloorPhase::AgentTurn { .. } => {
                        Ok(self.on_user_speech_during_agent_turn(signal.t, cfg.duplex))
                    }
                }
            }
            SignalKind::TurnEnd => {
                match self.shadowed.take() {
                    Some(Shadowed::Ignored) => return Ok(vec![FloorAction::Ignored]),
                    Some(Shadowed::Buffered) => {
                        if self.phase == FloorPhase::Idle {
                            // the response finished while the follow-up was
                            // still being spoken
                            return Ok(vec![self.dispatch(signal.t)]);
                        }
                        self.follow_up_pending = true;
                        return Ok(Vec::new());
                    }
                    None => {}
                }
                match self.phase {
                    FloorPhase::UserTurn => Ok(vec![self.dispatch(signal.t)]),
                    _ => Err(self.alternation(SignalKind::TurnEnd)),
                }
            }
        }
    }

    /// User speech while the agent holds the floor. Outside `AgentTurn` this
    /// is an ordinary turn start.
    pub fn on_user_speech_during_agent_turn(
        &mut self,
        now: VirtualTime,
        mode: DuplexMode,
    ) -> Vec<FloorAction> {
        match self.phase {
            FloorPhase::AgentTurn { playback, .. } => match mode {
                DuplexMode::HalfDuplex => {
                    self.shadowed = Some(Shadowed::Ignored);
                    vec![FloorAction::Ignored]
                }
                DuplexMode::FullDuplexBargeIn { interrupt_latency } => {
                    // the barge-in turn absorbs any buffered follow-up
                    self.follow_up_pending = false;
                    self.phase = FloorPhase::UserTurn;
                    vec![FloorAction::HaltPlayback {
                        playback,
                        at: now + interrupt_latency,
                    }]
                }
            },
            FloorPhase::Idle => {
                self.phase = FloorPhase::UserTurn;
                Vec::new()
            }
            FloorPhase::UserTurn | FloorPhase::Processing { .. } => Vec::new(),
        }
    }

    pub fn on_user_speech_during_processing(
        &mut self,
        _now: VirtualTime,
        policy: ProcessingSpeechPolicy,
    ) -> Result<Vec<FloorAction>, FloorError> {
        let FloorPhase::Processing { request, .. } = self.phase else {
            return Err(FloorError::NoPendingRequest(self.session.clone()));
        };
        match policy {
            ProcessingSpeechPolicy::CancelAndRestart => {
                self.phase = FloorPhase::UserTurn;
                self.filler_started = None;
                Ok(vec![FloorAction::CancelRequest { request }])
            }
            ProcessingSpeechPolicy::QueueAsFollowUp => {
                self.shadowed = Some(Shadowed::Buffered);
                Ok(Vec::new())
            }
        }
    }

    /// Returns `EmitFiller` when processing has been silent for at least the
    /// policy threshold and no filler is currently playing. Records the
    /// filler start.
    pub fn maybe_emit_filler(
        &mut self,
        now: VirtualTime,
        policy: &FillerPolicy,
    ) -> Option<FloorAction> {
        if !policy.enabled {
            return None;
        }
        let FloorPhase::Processing { entered_at, .. } = self.phase else {
            return None;
        };
        if now.since(entered_at) < policy.silence_threshold {
            return None;
        }
        match self.filler_started {
            None => {}
            Some(start) if policy.repeat && now >= start + policy.filler_duration => {}
            Some(_) => return None,
        }
        self.filler_started = Some(now);
        Some(FloorAction::EmitFiller { at: now })
    }

    /// Time at which the next filler check is due, if one could still fire.
    pub fn next_filler_check(&self, policy: &FillerPolicy) -> Option<VirtualTime> {
        if !policy.enabled {
            return None;
        }
        let FloorPhase::Processing { entered_at, .. } = self.phase else {
            return None;
        };
        match self.filler_started {
            None => Some(entered_at + policy.silence_threshold),
            Some(start) if policy.repeat => Some(start + policy.filler_duration),
            Some(_) => None,
        }
    }

    /// The response for `request` has its first audio ready. The response
    /// preempts any filler.
    pub fn on_response_ready(
        &mut self,
        request: RequestId,
        now: VirtualTime,
    ) -> Result<Vec<FloorAction>, FloorError> {
        match self.phase {
            FloorPhase::Processing { request: pending, .. } if pending == request => {
                let playback = PlaybackId(self.next_playback);
                self.next_playback += 1;
                self.phase = FloorPhase::AgentTurn {
                    playback,
                    started_at: now,
                };
                self.filler_started = None;
                Ok(vec![FloorAction::StartPlayback { playback, request }])
            }
            _ => Err(FloorError::StaleResponse {
                session: self.session.clone(),
                request,
            }),
        }
    }

    /// The request failed inside the pipeline; the floor returns to idle, or
    /// moves straight on to a buffered follow-up.
    pub fn abandon(
        &mut self,
        request: RequestId,
        now: VirtualTime,
    ) -> Result<Vec<FloorAction>, FloorError> {
        match self.phase {
            FloorPhase::Processing { request: pending, .. } if pending == request => {
                self.phase = FloorPhase::Idle;
                self.filler_started = None;
                let mut actions = vec![FloorAction::CancelRequest { request }];
                if self.follow_up_pending && self.shadowed.is_none() {
                    self.follow_up_pending = false;
                    actions.push(self.dispatch(now));
                }
                Ok(actions)
            }
            _ => Err(FloorError::StaleResponse {
                session: self.session.clone(),
                request,
            }),
        }
    }

    /// Playback ran to completion. A no-op if the playback was already
    /// interrupted. Dispatches a buffered follow-up turn if there is one.
    pub fn on_playback_finished(
        &mut self,
        playback: PlaybackId,
        now: VirtualTime,
    ) -> Vec<FloorAction> {
        match self.phase {
            FloorPhase::AgentTurn { playback: current, .. } if current == playback => {
                self.phase = FloorPhase::Idle;
                let mut actions = vec![FloorAction::PlaybackDone { playback }];
                if self.follow_up_pending && self.shadowed.is_none() {
                    self.follow_up_pending = false;
                    actions.push(self.dispatch(now));
                }
                actions
            }
            _ => Vec::new(),
        }
    }
}
