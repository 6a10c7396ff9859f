use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::config::{ConfigError, PipelineChoice, RunConfig};
use super::report::{summarize, LogEntry, LogEvent, Report};
use super::trace::{Trace, TraceKind};
use crate::adapters::{rng_stream, SimRng};
use crate::aggregator::ChunkPolicy;
use crate::event::{EventError, EventId, ScheduledEvent, Scheduler, SessionId};
use crate::floor::{DuplexMode, FloorAction, FloorPhase, FloorState, PlaybackId, RequestId};
use crate::hearing::{normalize_frame, AudioFrame, FloorSignal, SignalKind, VadState};
use crate::orchestrator::{
    classify_intent, route, run_turn, ConcurrencyGate, ConversationStore, GateError,
    PipelineTier, TierName, TurnMetrics, TurnOutcome, TurnRequest, TurnSettings,
};
use crate::time::{SimDuration, VirtualTime};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Event(#[from] EventError),
    #[error(transparent)]
    Gate(#[from] GateError),
}

/// A stretch of user speech.
#[derive(Debug, Clone, Default)]
struct Speech {
    text: String,
    duration: SimDuration,
    prosody: BTreeSet<String>,
}

#[derive(Debug)]
enum Msg {
    Trace(usize),
    /// Speech generated by the simulated user rather than read from the trace.
    Speak(Speech),
    SpeechEnd,
    FillerCheck { request: RequestId },
    Ready { request: RequestId },
    PlaybackEnd { playback: PlaybackId },
    Halt { playback: PlaybackId },
}

type GateKey = (SessionId, RequestId);

struct Live {
    row: usize,
    req: TurnRequest,
    tier: TierName,
    outcome: Option<TurnOutcome>,
    ready: Option<EventId>,
    filler: Option<EventId>,
}

struct Playing {
    playback: PlaybackId,
    request: RequestId,
    row: usize,
    end: EventId,
}

struct Session {
    floor: FloorState,
    vad: VadState,
    rng: SimRng,
    /// Speech currently being heard; becomes the transcript at turn end.
    heard: Speech,
    follow_up: Option<Speech>,
    to_repeat: Option<Speech>,
    turns: usize,
    live: BTreeMap<RequestId, Live>,
    playing: Option<Playing>,
}

struct Engine<'a> {
    cfg: &'a RunConfig,
    chunk_policy: ChunkPolicy,
    trace: &'a Trace,
    tiers: BTreeMap<TierName, PipelineTier>,
    gate: ConcurrencyGate<GateKey>,
    store: ConversationStore,
    sessions: BTreeMap<SessionId, Session>,
    report: Report,
}

/// Runs the whole stack over `trace` on the virtual clock. Failures inside a
/// turn are recorded on that turn and the run continues.
pub fn run_scenario(trace: &Trace, cfg: &RunConfig) -> Result<Report, ScenarioError> {
    cfg.validate()?;
    let tiers = TierName::ALL
        .into_iter()
        .map(|t| Ok((t, cfg.tier(t)?)))
        .collect::<Result<_, ConfigError>>()?;
    let mode = match cfg.floor.duplex {
        DuplexMode::HalfDuplex => "half",
        DuplexMode::FullDuplexBargeIn { .. } => "full",
    };
    let mut engine = Engine {
        cfg,
        chunk_policy: cfg.chunk_policy(),
        trace,
        tiers,
        gate: ConcurrencyGate::new(cfg.gate_capacity)?,
        store: ConversationStore::new(cfg.history_fetch),
        sessions: BTreeMap::new(),
        report: Report::new(cfg.seed, cfg.pipeline.to_string(), mode.into(), cfg.streaming),
    };
    let mut sched = Scheduler::new();
    for (i, ev) in trace.events.iter().enumerate() {
        engine.sessions.entry(ev.session.clone()).or_insert_with(|| Session {
            floor: FloorState::new(ev.session.clone()),
            vad: VadState::default(),
            rng: rng_stream(cfg.seed, ev.session.as_str(), "pipeline"),
            heard: Speech::default(),
            follow_up: None,
            to_repeat: None,
            turns: 0,
            live: BTreeMap::new(),
            playing: None,
        });
        sched.schedule_at(Msg::Trace(i), ev.t_ms, ev.session.clone());
    }
    while let Some(ev) = sched.pop()? {
        engine.handle(&mut sched, ev)?;
    }
    engine.report.summary = summarize(&engine.report.turns);
    Ok(engine.report)
}

impl Engine<'_> {
    fn sess(&mut self, id: &SessionId) -> &mut Session {
        self.sessions.get_mut(id).expect("sessions are created up front")
    }

    fn log(&mut self, t: VirtualTime, session: &SessionId, event: LogEvent) {
        self.report.log.push(LogEntry {
            t_ms: t,
            session: session.clone(),
            event,
        });
    }

    fn handle(
        &mut self,
        sched: &mut Scheduler<Msg>,
        ev: ScheduledEvent<Msg>,
    ) -> Result<(), ScenarioError> {
        let now = ev.fire_at;
        let sid = ev.session;
        match ev.payload {
            Msg::Trace(i) => self.on_trace(sched, &sid, i, now),
            Msg::Speak(speech) => self.start_speech(sched, &sid, speech, now),
            Msg::SpeechEnd => {
                let signal = FloorSignal {
                    kind: SignalKind::TurnEnd,
                    t: now,
                    session: sid.clone(),
                };
                self.on_signal(sched, &sid, signal)
            }
            Msg::FillerCheck { request } => {
                let policy = self.cfg.floor.filler;
                let s = self.sess(&sid);
                if s.floor.pending_request() != Some(request) {
                    return Ok(());
                }
                if s.floor.maybe_emit_filler(now, &policy).is_some() {
                    let next = s.floor.next_filler_check(&policy);
                    let live = s.live.get_mut(&request).expect("pending request is live");
                    let row = live.row;
                    live.filler = next.map(|at| sched.schedule_at(Msg::FillerCheck { request }, at, sid.clone()));
                    self.report.turns[row].filler_emitted = true;
                    self.log(now, &sid, LogEvent::Filler { request });
                }
                Ok(())
            }
            Msg::Ready { request } => {
                let s = self.sess(&sid);
                if let Some(live) = s.live.get_mut(&request) {
                    live.ready = None;
                    if let Some(id) = live.filler.take() {
                        sched.cancel(id);
                    }
                }
                match s.floor.on_response_ready(request, now) {
                    Ok(actions) => self.apply(sched, &sid, actions, now, None)?,
                    Err(e) => self.log(now, &sid, LogEvent::Error { message: e.to_string() }),
                }
                self.release(sched, &sid, request, now)
            }
            Msg::PlaybackEnd { playback } => {
                let s = self.sess(&sid);
                let finished = s.playing.take_if(|p| p.playback == playback);
                let actions = s.floor.on_playback_finished(playback, now);
                let follow_up = s.follow_up.take();
                if let Some(p) = finished {
                    self.log(now, &sid, LogEvent::PlaybackEnd { request: p.request });
                }
                self.apply(sched, &sid, actions, now, follow_up)?;
                if let Some(speech) = self.sess(&sid).to_repeat.take() {
                    sched.schedule_at(Msg::Speak(speech), now, sid.clone());
                }
                Ok(())
            }
            Msg::Halt { playback } => {
                let s = self.sess(&sid);
                let Some(p) = s.playing.take_if(|p| p.playback == playback) else {
                    return Ok(());
                };
                sched.cancel(p.end);
                self.report.turns[p.row].playback_end_ms = Some(now);
                self.log(now, &sid, LogEvent::PlaybackHalted { request: p.request });
                Ok(())
            }
        }
    }

    fn on_trace(
        &mut self,
        sched: &mut Scheduler<Msg>,
        sid: &SessionId,
        i: usize,
        now: VirtualTime,
    ) -> Result<(), ScenarioError> {
        match &self.trace.events[i].kind {
            TraceKind::Frame {
                vad_raw, gain, text, ..
            } => {
                let mut frame = AudioFrame::new(now, sid.clone(), *vad_raw);
                frame.gain = *gain;
                let vad_cfg = &self.cfg.vad;
                let s = self.sess(sid);
                if let Some(text) = text {
                    if !s.heard.text.is_empty() {
                        s.heard.text.push(' ');
                    }
                    s.heard.text.push_str(text);
                }
                let signal = normalize_frame(frame, 1.0).and_then(|f| s.vad.step(&f, vad_cfg));
                match signal {
                    Ok(Some(signal)) => self.on_signal(sched, sid, signal)?,
                    Ok(None) => {}
                    Err(e) => self.log(now, sid, LogEvent::Error { message: e.to_string() }),
                }
                Ok(())
            }
            TraceKind::Utterance {
                text,
                duration_ms,
                prosody,
            } => {
                let speech = Speech {
                    text: text.clone(),
                    duration: *duration_ms,
                    prosody: prosody.clone(),
                };
                self.start_speech(sched, sid, speech, now)
            }
            TraceKind::BargeIn { text, duration_ms } => {
                let speech = Speech {
                    text: text.clone(),
                    duration: *duration_ms,
                    prosody: BTreeSet::new(),
                };
                self.start_speech(sched, sid, speech, now)
            }
            TraceKind::End => Ok(()),
        }
    }

    fn start_speech(
        &mut self,
        sched: &mut Scheduler<Msg>,
        sid: &SessionId,
        speech: Speech,
        now: VirtualTime,
    ) -> Result<(), ScenarioError> {
        let duration = speech.duration;
        self.sess(sid).heard = speech;
        sched.schedule(Msg::SpeechEnd, duration, sid.clone());
        let signal = FloorSignal {
            kind: SignalKind::TurnStart,
            t: now,
            session: sid.clone(),
        };
        self.on_signal(sched, sid, signal)
    }

    fn on_signal(
        &mut self,
        sched: &mut Scheduler<Msg>,
        sid: &SessionId,
        signal: FloorSignal,
    ) -> Result<(), ScenarioError> {
        let now = signal.t.max(sched.now());
        let kind = signal.kind;
        self.log(
            now,
            sid,
            match kind {
                SignalKind::TurnStart => LogEvent::TurnStart,
                SignalKind::TurnEnd => LogEvent::TurnEnd,
            },
        );
        let floor_cfg = self.cfg.floor;
        let repeat = self.cfg.repeat_ignored_speech;
        let s = self.sess(sid);
        let actions = match s.floor.on_floor_signal(&signal, &floor_cfg) {
            Ok(a) => a,
            Err(e) => {
                self.log(now, sid, LogEvent::Error { message: e.to_string() });
                return Ok(());
            }
        };
        if kind == SignalKind::TurnStart {
            if actions.contains(&FloorAction::Ignored) {
                self.log(now, sid, LogEvent::SpeechIgnored);
            }
            return self.apply(sched, sid, actions, now, None);
        }
        let heard = std::mem::take(&mut s.heard);
        if actions.contains(&FloorAction::Ignored) {
            // frames carry no duration, so only utterance speech is repeated
            if repeat && heard.duration > SimDuration::ZERO {
                if matches!(s.floor.phase, FloorPhase::AgentTurn { .. }) {
                    s.to_repeat = Some(heard);
                } else {
                    sched.schedule_at(Msg::Speak(heard), now, sid.clone());
                }
            }
            return Ok(());
        }
        if actions.is_empty() && s.floor.has_follow_up() {
            s.follow_up = Some(heard);
            self.log(now, sid, LogEvent::FollowUpBuffered);
            return Ok(());
        }
        self.apply(sched, sid, actions, now, Some(heard))
    }

    fn apply(
        &mut self,
        sched: &mut Scheduler<Msg>,
        sid: &SessionId,
        actions: Vec<FloorAction>,
        now: VirtualTime,
        mut speech: Option<Speech>,
    ) -> Result<(), ScenarioError> {
        for action in actions {
            match action {
                FloorAction::DispatchTurn { request } => {
                    self.dispatch(sched, sid, request, speech.take().unwrap_or_default(), now)?
                }
                FloorAction::Ignored | FloorAction::EmitFiller { .. } | FloorAction::PlaybackDone { .. } => {}
                FloorAction::HaltPlayback { playback, at } => {
                    sched.schedule_at(Msg::Halt { playback }, at, sid.clone());
                    let s = self.sess(sid);
                    if let Some(earlier) = s.follow_up.take() {
                        s.heard.text = format!("{} {}", earlier.text, s.heard.text);
                    }
                }
                FloorAction::CancelRequest { request } => self.cancel(sched, sid, request, now)?,
                FloorAction::StartPlayback { playback, request } => {
                    self.start_playback(sched, sid, playback, request, now)
                }
            }
        }
        Ok(())
    }

    fn choose_tier(&self, transcript: &str) -> TierName {
        match self.cfg.pipeline {
            PipelineChoice::Fixed(t) => t,
            PipelineChoice::Route => route(
                classify_intent(transcript, &self.cfg.phatic_lexicon),
                &self.cfg.routing,
            ),
        }
    }

    fn dispatch(
        &mut self,
        sched: &mut Scheduler<Msg>,
        sid: &SessionId,
        request: RequestId,
        speech: Speech,
        now: VirtualTime,
    ) -> Result<(), ScenarioError> {
        let tier = self.choose_tier(&speech.text);
        let row = self.report.turns.len();
        let policy = self.cfg.floor.filler;
        let s = self.sess(sid);
        let turn_index = s.turns;
        s.turns += 1;
        let filler = s
            .floor
            .next_filler_check(&policy)
            .map(|at| sched.schedule_at(Msg::FillerCheck { request }, at, sid.clone()));
        let req = TurnRequest {
            session: sid.clone(),
            request_id: request,
            turn_index,
            transcript: speech.text,
            prosody: speech.prosody,
            t_submitted: now,
        };
        s.live.insert(
            request,
            Live {
                row,
                req,
                tier,
                outcome: None,
                ready: None,
                filler,
            },
        );
        let mut metrics = TurnMetrics::new(sid.clone(), turn_index, tier);
        metrics.turn_end_ms = now;
        self.report.turns.push(metrics);
        self.log(now, sid, LogEvent::Dispatch { request, tier });
        match self.gate.acquire((sid.clone(), request), now)? {
            crate::orchestrator::Admission::Admitted => self.start_turn(sched, sid, request, now),
            crate::orchestrator::Admission::Queued { .. } => {
                self.log(now, sid, LogEvent::Queued { request });
                Ok(())
            }
        }
    }

    fn start_turn(
        &mut self,
        sched: &mut Scheduler<Msg>,
        sid: &SessionId,
        request: RequestId,
        now: VirtualTime,
    ) -> Result<(), ScenarioError> {
        self.log(now, sid, LogEvent::Admitted { request });
        let cfg = self.cfg;
        let settings = TurnSettings {
            phrase_set: &cfg.phrase_set,
            repair: &cfg.repair,
            rag: &cfg.rag,
            chunk_policy: &self.chunk_policy,
            llm: &cfg.llm,
            streaming: cfg.streaming,
            costs: &cfg.costs,
        };
        let s = self.sessions.get_mut(sid).expect("known session");
        let live = s.live.get_mut(&request).expect("admitted request is live");
        let tier = &self.tiers[&live.tier];
        match run_turn(&live.req, tier, now, &self.store, settings, &mut s.rng) {
            Ok(outcome) => {
                let row = &mut self.report.turns[live.row];
                let filler_emitted = row.filler_emitted;
                *row = outcome.metrics.clone();
                row.filler_emitted = filler_emitted;
                live.ready = Some(sched.schedule_at(
                    Msg::Ready { request },
                    outcome.timeline.first_audio,
                    sid.clone(),
                ));
                live.outcome = Some(outcome);
                Ok(())
            }
            Err(e) => {
                self.report.turns[live.row].error = Some(e.to_string());
                if let Some(id) = live.filler.take() {
                    sched.cancel(id);
                }
                s.live.remove(&request);
                let abandoned = s.floor.abandon(request, now);
                let follow_up = s.follow_up.take();
                self.log(now, sid, LogEvent::Error { message: e.to_string() });
                match abandoned {
                    Ok(actions) => {
                        self.log(now, sid, LogEvent::Cancel { request });
                        self.release(sched, sid, request, now)?;
                        self.apply(sched, sid, actions, now, follow_up)
                    }
                    Err(e) => {
                        self.log(now, sid, LogEvent::Error { message: e.to_string() });
                        self.release(sched, sid, request, now)
                    }
                }
            }
        }
    }

    /// Frees the gate slot of `request` and starts whichever turn it admits.
    fn release(
        &mut self,
        sched: &mut Scheduler<Msg>,
        sid: &SessionId,
        request: RequestId,
        now: VirtualTime,
    ) -> Result<(), ScenarioError> {
        match self.gate.withdraw(&(sid.clone(), request), now) {
            Some(next) => {
                let (next_sid, next_request) = next.key;
                self.start_turn(sched, &next_sid, next_request, now)
            }
            None => Ok(()),
        }
    }

    fn cancel(
        &mut self,
        sched: &mut Scheduler<Msg>,
        sid: &SessionId,
        request: RequestId,
        now: VirtualTime,
    ) -> Result<(), ScenarioError> {
        let Some(live) = self.sess(sid).live.remove(&request) else {
            return Ok(());
        };
        for id in [live.ready, live.filler].into_iter().flatten() {
            sched.cancel(id);
        }
        let row = &mut self.report.turns[live.row];
        row.canceled = true;
        row.turn_delay_ms = None;
        row.first_audio_ms = None;
        row.playback_end_ms = None;
        self.log(now, sid, LogEvent::Cancel { request });
        self.release(sched, sid, request, now)
    }

    fn start_playback(
        &mut self,
        sched: &mut Scheduler<Msg>,
        sid: &SessionId,
        playback: PlaybackId,
        request: RequestId,
        now: VirtualTime,
    ) {
        let Some(live) = self.sess(sid).live.remove(&request) else {
            return;
        };
        let outcome = live.outcome.expect("ready turns have an outcome");
        let end = sched.schedule_at(
            Msg::PlaybackEnd { playback },
            outcome.timeline.playback_end,
            sid.clone(),
        );
        self.sess(sid).playing = Some(Playing {
            playback,
            request,
            row: live.row,
            end,
        });
        self.store.commit_exchange(
            sid,
            (&outcome.transcript, live.req.t_submitted),
            (&outcome.response, now),
        );
        self.log(now, sid, LogEvent::PlaybackStart { request });
    }
}
