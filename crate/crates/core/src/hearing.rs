//! Hearing layer: turns per-frame voice-activity probabilities into
//! `TurnStart` / `TurnEnd` floor signals.
//!
//! Each frame is gain-normalized, its probability smoothed with a first-order
//! exponential moving average, and the smoothed value drives a small state
//! machine with asymmetric thresholds. A start needs `start_frames`
//! consecutive frames at or above `theta_start`; an end needs the smoothed
//! value to stay at or below `theta_end` for `hangover` after the last frame
//! that was above it, so micro-pauses inside a turn are absorbed.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::SessionId;
use crate::time::{SimDuration, VirtualTime};

#[derive(Debug, Error, PartialEq)]
pub enum HearingError {
    #[error("frame gain must be positive, got {0}")]
    NonPositiveGain(f64),
    #[error("frame at {got} is not after the previous frame at {prev}")]
    OutOfOrder { prev: VirtualTime, got: VirtualTime },
    #[error("invalid VAD config: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioFrame {
    pub t: VirtualTime,
    pub session: SessionId,
    pub vad_raw: f64,
    pub gain: f64,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub prosody: BTreeSet<String>,
}

impl AudioFrame {
    pub fn new(t: VirtualTime, session: SessionId, vad_raw: f64) -> Self {
        AudioFrame {
            t,
            session,
            vad_raw,
            gain: 1.0,
            prosody: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VadConfig {
    pub alpha: f64,
    pub theta_start: f64,
    pub theta_end: f64,
    pub start_frames: u32,
    #[serde(rename = "hangover_ms")]
    pub hangover: SimDuration,
    #[serde(rename = "frame_period_ms")]
    pub frame_period: SimDuration,
}

impl Default for VadConfig {
    fn default() -> Self {
        VadConfig {
            alpha: 0.3,
            theta_start: 0.80,
            theta_end: 0.40,
            start_frames: 3,
            hangover: SimDuration::from_ms(600),
            frame_period: SimDuration::from_ms(20),
        }
    }
}

impl VadConfig {
    pub fn validate(&self) -> Result<(), HearingError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(HearingError::Config("alpha must be in (0, 1]"));
        }
        if !(0.0 <= self.theta_end && self.theta_end < self.theta_start && self.theta_start <= 1.0)
        {
            return Err(HearingError::Config(
                "thresholds must satisfy 0 <= theta_end < theta_start <= 1",
            ));
        }
        if self.start_frames == 0 {
            return Err(HearingError::Config("start_frames must be positive"));
        }
        if self.frame_period.is_zero() {
            return Err(HearingError::Config("frame_period_ms must be positive"));
        }
        if self.hangover < self.frame_period {
            return Err(HearingError::Config("hangover_ms must be >= frame_period_ms"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    TurnStart,
    TurnEnd,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FloorSignal {
    pub kind: SignalKind,
    pub t: VirtualTime,
    pub session: SessionId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VadPhase {
    Silent,
    /// Consecutive frames at or above `theta_start` seen so far.
    Arming(u32),
    InTurn,
    /// Time since the last frame above `theta_end`.
    Cooling(SimDuration),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VadState {
    pub smoothed: f64,
    pub phase: VadPhase,
    last_t: Option<VirtualTime>,
    last_above_end: Option<VirtualTime>,
}

impl Default for VadState {
    fn default() -> Self {
        VadState {
            smoothed: 0.0,
            phase: VadPhase::Silent,
            last_t: None,
            last_above_end: None,
        }
    }
}

impl VadState {
    /// In-place form of [`step_vad`].
    pub fn step(
        &mut self,
        frame: &AudioFrame,
        cfg: &VadConfig,
    ) -> Result<Option<FloorSignal>, HearingError> {
        let (next, signal) = step_vad(self, frame, cfg)?;
        *self = next;
        Ok(signal)
    }
}

/// Forces the frame to `target_gain` and clamps its probability into [0, 1].
pub fn normalize_frame(frame: AudioFrame, target_gain: f64) -> Result<AudioFrame, HearingError> {
    if frame.gain.is_nan() || frame.gain <= 0.0 {
        return Err(HearingError::NonPositiveGain(frame.gain));
    }
    if target_gain.is_nan() || target_gain <= 0.0 {
        return Err(HearingError::NonPositiveGain(target_gain));
    }
    let vad_raw = if frame.vad_raw.is_nan() {
        0.0
    } else {
        frame.vad_raw.clamp(0.0, 1.0)
    };
    Ok(AudioFrame {
        gain: target_gain,
        vad_raw,
        ..frame
    })
}

pub fn smooth(prev: f64, raw: f64, alpha: f64) -> f64 {
    (alpha * raw + (1.0 - alpha) * prev).clamp(0.0, 1.0)
}

pub fn step_vad(
    state: &VadState,
    frame: &AudioFrame,
    cfg: &VadConfig,
) -> Result<(VadState, Option<FloorSignal>), HearingError> {
    if let Some(prev) = state.last_t {
        if frame.t <= prev {
            return Err(HearingError::OutOfOrder { prev, got: frame.t });
        }
    }
    let s = smooth(state.smoothed, frame.vad_raw.clamp(0.0, 1.0), cfg.alpha);
    let mut next = VadState {
        smoothed: s,
        phase: state.phase,
        last_t: Some(frame.t),
        last_above_end: state.last_above_end,
    };
    let signal = |kind| {
        Some(FloorSignal {
            kind,
            t: frame.t,
            session: frame.session.clone(),
        })
    };

    let mut emitted = None;
    match state.phase {
        VadPhase::Silent | VadPhase::Arming(_) => {
            let count = match state.phase {
                VadPhase::Arming(c) => c,
                _ => 0,
            };
            if s >= cfg.theta_start {
                let count = count + 1;
                if count >= cfg.start_frames {
                    next.phase = VadPhase::InTurn;
                    next.last_above_end = Some(frame.t);
                    emitted = signal(SignalKind::TurnStart);
                } else {
                    next.phase = VadPhase::Arming(count);
                }
            } else {
                next.phase = VadPhase::Silent;
            }
        }
        VadPhase::InTurn | VadPhase::Cooling(_) => {
            if s > cfg.theta_end {
                next.phase = VadPhase::InTurn;
                next.last_above_end = Some(frame.t);
            } else {
                let anchor = state.last_above_end.unwrap_or(frame.t);
                let elapsed = frame.t.since(anchor);
                if elapsed >= cfg.hangover {
                    next.phase = VadPhase::Silent;
                    next.last_above_end = None;
                    emitted = signal(SignalKind::TurnEnd);
                } else {
                    next.phase = VadPhase::Cooling(elapsed);
                }
            }
        }
    }
    Ok((next, emitted))
}

/// Runs a whole frame sequence through a fresh state and collects signals.
pub fn detect_signals(
    frames: &[AudioFrame],
    cfg: &VadConfig,
) -> Result<Vec<FloorSignal>, HearingError> {
    let mut state = VadState::default();
    let mut out = Vec::new();
    for frame in frames {
        if let Some(sig) = state.step(frame, cfg)? {
            out.push(sig);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(values: &[f64], period_ms: u64) -> Vec<AudioFrame> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                AudioFrame::new(
                    VirtualTime::from_ms(i as u64 * period_ms),
                    SessionId::new("s"),
                    v,
                )
            })
            .collect()
    }

    fn sharp() -> VadConfig {
        VadConfig {
            alpha: 1.0,
            ..VadConfig::default()
        }
    }

    #[test]
    fn normalize_identity_and_clamp() {
        let f = AudioFrame::new(VirtualTime::ZERO, SessionId::new("s"), 0.7);
        assert_eq!(normalize_frame(f.clone(), 1.0).unwrap(), f);

        let mut corrupt = f.clone();
        corrupt.vad_raw = 1.3;
        assert_eq!(normalize_frame(corrupt, 1.0).unwrap().vad_raw, 1.0);

        let mut quiet = f.clone();
        quiet.gain = 0.5;
        quiet.prosody.insert("urgent".into());
        let n = normalize_frame(quiet, 1.0).unwrap();
        assert_eq!(n.gain, 1.0);
        assert_eq!(n.vad_raw, 0.7);
        assert!(n.prosody.contains("urgent"));

        let mut dead = f;
        dead.gain = 0.0;
        assert_eq!(
            normalize_frame(dead, 1.0),
            Err(HearingError::NonPositiveGain(0.0))
        );
    }

    #[test]
    fn smoothing_examples() {
        assert_eq!(smooth(0.42, 0.9, 1.0), 0.9);
        assert_eq!(smooth(0.0, 1.0, 0.5), 0.5);
        assert!((smooth(0.8, 0.2, 0.25) - 0.65).abs() < 1e-12);
    }

    #[test]
    fn silence_never_signals() {
        let fs = frames(&[0.0; 200], 20);
        assert!(detect_signals(&fs, &VadConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn start_on_third_frame() {
        let fs = frames(&[1.0; 5], 20);
        let sigs = detect_signals(&fs, &sharp()).unwrap();
        assert_eq!(sigs.len(), 1);
        assert_eq!(sigs[0].kind, SignalKind::TurnStart);
        assert_eq!(sigs[0].t, VirtualTime::from_ms(40));
    }

    #[test]
    fn arming_resets_on_dip() {
        let fs = frames(&[1.0, 1.0, 0.0, 1.0, 1.0, 1.0], 20);
        let sigs = detect_signals(&fs, &sharp()).unwrap();
        assert_eq!(sigs[0].t, VirtualTime::from_ms(100));
    }

    #[test]
    fn micro_pause_is_absorbed() {
        let cfg = sharp();
        // 600 ms hangover, 20 ms frames: 29 low frames = 580 ms of dip.
        let mut v = vec![1.0; 10];
        v.extend(std::iter::repeat_n(0.1, 29));
        v.extend(std::iter::repeat_n(1.0, 10));
        let sigs = detect_signals(&frames(&v, 20), &cfg).unwrap();
        assert_eq!(sigs.len(), 1);
        assert_eq!(sigs[0].kind, SignalKind::TurnStart);
    }

    #[test]
    fn sustained_silence_ends_turn_at_hangover() {
        let cfg = sharp();
        let mut v = vec![1.0; 10];
        v.extend(std::iter::repeat_n(0.1, 40));
        let sigs = detect_signals(&frames(&v, 20), &cfg).unwrap();
        assert_eq!(sigs.len(), 2);
        assert_eq!(sigs[1].kind, SignalKind::TurnEnd);
        // last frame above theta_end is at 180 ms
        assert_eq!(sigs[1].t, VirtualTime::from_ms(180 + 600));
    }

    #[test]
    fn rejects_out_of_order_frames() {
        let mut fs = frames(&[0.0, 0.0], 20);
        fs.swap(0, 1);
        assert!(matches!(
            detect_signals(&fs, &VadConfig::default()),
            Err(HearingError::OutOfOrder { .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(VadConfig::default().validate().is_ok());
        let equal = VadConfig {
            theta_end: 0.8,
            ..VadConfig::default()
        };
        assert!(equal.validate().is_err());
        let short = VadConfig {
            hangover: SimDuration::from_ms(10),
            ..VadConfig::default()
        };
        assert!(short.validate().is_err());
    }
}
