//! Simulated ASR, LLM and TTS components.
//!
//! Each component is a [`ComponentProfile`]: a latency model plus optional
//! behaviour knobs. Named presets carry the measured point estimates of the
//! reference deployment. ASR output is plain text, so any prosody annotation
//! on the input utterance is lost by construction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::aggregator::{SpeechChunk, TokenEvent};
use crate::orchestrator::{Prompt, TierName};
use crate::repair::{self, PhraseSet};
use crate::time::{SimDuration, VirtualTime, TICKS_PER_MS};

pub type SimRng = ChaCha8Rng;

/// Derives an independent, reproducible RNG stream for one session and
/// purpose from the run seed.
pub fn rng_stream(seed: u64, session: &str, purpose: &str) -> SimRng {
    // FNV-1a, stable across platforms and toolchains.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in session.bytes().chain([0xff]).chain(purpose.bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

#[derive(Debug, Error, PartialEq)]
pub enum AdapterError {
    #[error("cannot synthesize an empty chunk")]
    EmptyChunk,
    #[error("no cost configured for tier {0}")]
    UnknownTier(TierName),
    #[error("invalid latency model: {0}")]
    Latency(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LatencyModel {
    Constant(SimDuration),
    Uniform {
        #[serde(rename = "lo_ms")]
        lo: SimDuration,
        #[serde(rename = "hi_ms")]
        hi: SimDuration,
    },
    /// Parameters of the underlying normal, in log-milliseconds.
    LogNormal { mu: f64, sigma: f64 },
}

impl LatencyModel {
    pub fn constant_ms(ms: f64) -> Self {
        LatencyModel::Constant(SimDuration::from_ms_f64(ms).expect("non-negative latency"))
    }

    pub fn validate(&self) -> Result<(), AdapterError> {
        match self {
            LatencyModel::Constant(_) => Ok(()),
            LatencyModel::Uniform { lo, hi } if lo <= hi => Ok(()),
            LatencyModel::Uniform { .. } => Err(AdapterError::Latency("lo_ms > hi_ms".into())),
            LatencyModel::LogNormal { mu, sigma } if mu.is_finite() && *sigma >= 0.0 => Ok(()),
            LatencyModel::LogNormal { .. } => {
                Err(AdapterError::Latency("log_normal needs finite mu, sigma >= 0".into()))
            }
        }
    }

    /// Constant models never touch the RNG.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SimDuration {
        match self {
            LatencyModel::Constant(d) => *d,
            LatencyModel::Uniform { lo, hi } => {
                SimDuration::from_ticks(rng.random_range(lo.ticks()..=hi.ticks()))
            }
            LatencyModel::LogNormal { mu, sigma } => {
                let ms = LogNormal::new(*mu, *sigma)
                    .map(|d| d.sample(rng))
                    .unwrap_or(0.0);
                SimDuration::from_ms_f64(ms).unwrap_or(SimDuration::ZERO)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionModel {
    pub phrase_set: PhraseSet,
    pub corruption_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentProfile {
    #[serde(default)]
    pub name: String,
    pub latency: LatencyModel,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corruption: Option<CorruptionModel>,
    /// Tokens per second; LLM only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream_rate: Option<f64>,
    /// Characters per second; TTS only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaking_rate: Option<f64>,
}

pub const DEFAULT_STREAM_RATE: f64 = 10.0;
pub const DEFAULT_SPEAKING_RATE: f64 = 15.0;

pub const PRESET_NAMES: [&str; 7] = [
    "typhoon",
    "google-stt-v1",
    "flash",
    "flash-lite-repair",
    "gpt5",
    "tts-default",
    "gpt-realtime",
];

impl ComponentProfile {
    pub fn new(name: &str, latency: LatencyModel) -> Self {
        ComponentProfile {
            name: name.to_owned(),
            latency,
            meta: BTreeMap::new(),
            corruption: None,
            stream_rate: None,
            speaking_rate: None,
        }
    }

    pub fn constant(name: &str, ms: f64) -> Self {
        Self::new(name, LatencyModel::constant_ms(ms))
    }

    fn with_meta(mut self, key: &str, value: f64) -> Self {
        self.meta.insert(key.to_owned(), value);
        self
    }

    pub fn preset(name: &str) -> Result<Self, AdapterError> {
        let p = match name {
            "typhoon" => Self::constant(name, 417.1).with_meta("wer", 0.562),
            "google-stt-v1" => Self::constant(name, 2457.2).with_meta("wer", 0.243),
            "flash" => Self {
                stream_rate: Some(DEFAULT_STREAM_RATE),
                ..Self::constant(name, 1148.6)
            },
            "flash-lite-repair" => Self::constant(name, 623.0),
            "gpt5" => Self {
                stream_rate: Some(DEFAULT_STREAM_RATE),
                ..Self::constant(name, 5264.1)
            },
            "tts-default" => Self {
                speaking_rate: Some(DEFAULT_SPEAKING_RATE),
                ..Self::constant(name, 450.0)
            },
            "gpt-realtime" => Self {
                speaking_rate: Some(DEFAULT_SPEAKING_RATE),
                ..Self::new(
                    name,
                    LatencyModel::Uniform {
                        lo: SimDuration::from_ms(4000),
                        hi: SimDuration::from_ms(6000),
                    },
                )
            },
            _ => return Err(AdapterError::UnknownPreset(name.to_owned())),
        };
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), AdapterError> {
        self.latency.validate()?;
        for rate in [self.stream_rate, self.speaking_rate].into_iter().flatten() {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(AdapterError::Latency(format!(
                    "{}: rates must be positive",
                    self.name
                )));
            }
        }
        if let Some(c) = &self.corruption {
            if !(0.0..=1.0).contains(&c.corruption_rate) {
                return Err(AdapterError::Latency(format!(
                    "{}: corruption_rate must be within [0, 1]",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Spoken user input as the trace describes it.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Utterance {
    pub text: String,
    pub prosody: BTreeSet<String>,
}

/// ASR output. There is deliberately no prosody field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEvent {
    pub text: String,
    #[serde(rename = "latency_ms")]
    pub latency: SimDuration,
    pub corrupted_terms: usize,
}

/// Replaces each occurrence of a canonical term with one of its variants
/// with probability `rate`.
pub fn corrupt_text<R: Rng + ?Sized>(
    text: &str,
    ps: &PhraseSet,
    rate: f64,
    rng: &mut R,
) -> (String, usize) {
    let tokens = repair::tokenize(text);
    let cores: Vec<String> = tokens
        .iter()
        .map(|t| text[t.core.clone()].to_lowercase())
        .collect();
    let mut canon: Vec<(usize, Vec<String>)> = ps
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| !e.variants.is_empty())
        .map(|(i, e)| {
            let words = e
                .canonical
                .split_whitespace()
                .map(str::to_lowercase)
                .collect();
            (i, words)
        })
        .filter(|(_, w): &(usize, Vec<String>)| !w.is_empty())
        .collect();
    // longer terms first so "Google Cloud" beats "Google"
    canon.sort_by_key(|(i, w)| (std::cmp::Reverse(w.len()), *i));

    let mut out = String::with_capacity(text.len());
    let mut copied_to = 0;
    let mut corrupted = 0;
    let mut i = 0;
    while i < tokens.len() {
        let hit = canon.iter().find(|(_, words)| {
            i + words.len() <= tokens.len()
                && words.iter().zip(&cores[i..]).all(|(w, c)| w == c)
        });
        let Some((entry, words)) = hit else {
            i += 1;
            continue;
        };
        let n = words.len();
        if rng.random::<f64>() < rate {
            let variants = &ps.entries[*entry].variants;
            let v = &variants[rng.random_range(0..variants.len())];
            let span = tokens[i].core.start..tokens[i + n - 1].core.end;
            out.push_str(&text[copied_to..span.start]);
            out.push_str(v);
            copied_to = span.end;
            corrupted += 1;
        }
        i += n;
    }
    out.push_str(&text[copied_to..]);
    (out, corrupted)
}

pub fn sim_asr<R: Rng + ?Sized>(
    utterance: &Utterance,
    profile: &ComponentProfile,
    rng: &mut R,
) -> TranscriptEvent {
    let latency = profile.latency.sample(rng);
    let (text, corrupted_terms) = match &profile.corruption {
        Some(c) => corrupt_text(&utterance.text, &c.phrase_set, c.corruption_rate, rng),
        None => (utterance.text.clone(), 0),
    };
    TranscriptEvent {
        text,
        latency,
        corrupted_terms,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlmMode {
    #[default]
    Batch,
    Streaming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSettings {
    pub first_token_fraction: f64,
    pub fallback_text: String,
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings {
            first_token_fraction: 0.3,
            fallback_text: "I'm sorry, I could not find that in our documentation.".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
    /// Time from invocation to the end of the response.
    #[serde(rename = "total_ms")]
    pub total: SimDuration,
    /// Streaming mode only; times are offsets from invocation.
    pub tokens: Vec<TokenEvent>,
}

impl LlmResponse {
    pub fn first_token(&self) -> Option<SimDuration> {
        self.tokens
            .first()
            .map(|t| SimDuration::from_ticks(t.t.ticks()))
    }
}

fn split_tokens(text: &str) -> Vec<&str> {
    text.split_inclusive(' ').collect()
}

/// Token offsets for a streamed response of `total` duration. The first
/// token lands at `fraction * total`, the rest follow at the profile rate,
/// compressed if needed so the last token still arrives before `total`.
pub fn stream_schedule(total: SimDuration, n: usize, fraction: f64, rate: f64) -> Vec<SimDuration> {
    if n == 0 {
        return Vec::new();
    }
    let total = total.ticks();
    let first = ((total as f64) * fraction.clamp(0.0, 1.0)).floor() as u64;
    let first = first.min(total);
    let by_rate = ((TICKS_PER_MS * 1000) as f64 / rate).round() as u64;
    let window = (total - first) / n as u64;
    let gap = by_rate.min(window);
    (0..n as u64)
        .map(|i| SimDuration::from_ticks(first + i * gap))
        .collect()
}

pub fn sim_llm<R: Rng + ?Sized>(
    prompt: &Prompt,
    profile: &ComponentProfile,
    settings: &LlmSettings,
    rng: &mut R,
    mode: LlmMode,
) -> LlmResponse {
    let total = profile.latency.sample(rng);
    let text = match prompt.chunks.first() {
        Some(chunk) => chunk.text.clone(),
        None => settings.fallback_text.clone(),
    };
    let tokens = match mode {
        LlmMode::Batch => Vec::new(),
        LlmMode::Streaming => {
            let pieces = split_tokens(&text);
            let rate = profile.stream_rate.unwrap_or(DEFAULT_STREAM_RATE);
            stream_schedule(total, pieces.len(), settings.first_token_fraction, rate)
                .into_iter()
                .zip(pieces)
                .map(|(at, piece)| TokenEvent::new(VirtualTime::from_ticks(at.ticks()), piece))
                .collect()
        }
    };
    LlmResponse {
        text,
        total,
        tokens,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudioOut {
    #[serde(rename = "synthesis_latency_ms")]
    pub synthesis_latency: SimDuration,
    #[serde(rename = "playback_duration_ms")]
    pub playback_duration: SimDuration,
}

/// Whole milliseconds of audio for `chars` characters, rounded up.
pub fn playback_duration(chars: usize, rate: f64) -> SimDuration {
    let ms = (chars as f64 * 1000.0 / rate - 1e-9).ceil().max(0.0);
    SimDuration::from_ms(ms as u64)
}

pub fn sim_tts<R: Rng + ?Sized>(
    chunk: &SpeechChunk,
    profile: &ComponentProfile,
    rng: &mut R,
) -> Result<AudioOut, AdapterError> {
    if chunk.text.is_empty() {
        return Err(AdapterError::EmptyChunk);
    }
    let rate = profile.speaking_rate.unwrap_or(DEFAULT_SPEAKING_RATE);
    Ok(AudioOut {
        synthesis_latency: profile.latency.sample(rng),
        playback_duration: playback_duration(chunk.text.chars().count(), rate),
    })
}

/// US dollars, stored in millionths so that totals stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Usd(u64);

impl Usd {
    pub const ZERO: Usd = Usd(0);

    pub fn from_dollars(d: f64) -> Option<Self> {
        (d.is_finite() && d >= 0.0).then(|| Usd((d * 1e6).round() as u64))
    }

    pub const fn from_micros(m: u64) -> Self {
        Usd(m)
    }

    pub fn micros(self) -> u64 {
        self.0
    }

    pub fn dollars(self) -> f64 {
        self.0 as f64 / 1e6
    }
}

impl std::ops::Add for Usd {
    type Output = Usd;
    fn add(self, rhs: Usd) -> Usd {
        Usd(self.0 + rhs.0)
    }
}

impl std::iter::Sum for Usd {
    fn sum<I: Iterator<Item = Usd>>(iter: I) -> Self {
        Usd(iter.map(|u| u.0).sum())
    }
}

impl fmt::Display for Usd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "${:.4}", self.dollars())
    }
}

impl Serialize for Usd {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.dollars())
    }
}

impl<'de> Deserialize<'de> for Usd {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Usd::from_dollars(v)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid dollar amount {v}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct CostModel {
    pub per_turn: BTreeMap<TierName, Usd>,
}

/// Entries given in configuration override the defaults one by one.
impl<'de> Deserialize<'de> for CostModel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let overrides = BTreeMap::<TierName, Usd>::deserialize(d)?;
        let mut model = CostModel::default();
        model.per_turn.extend(overrides);
        Ok(model)
    }
}

impl Default for CostModel {
    fn default() -> Self {
        let per_turn = [
            (TierName::Fluid, 1000),
            (TierName::Precise, 2300),
            (TierName::Reasoning, 4600),
            (TierName::DeepReasoning, 4600),
            (TierName::RealtimeBenchmark, 15400),
        ]
        .into_iter()
        .map(|(t, m)| (t, Usd::from_micros(m)))
        .collect();
        CostModel { per_turn }
    }
}

pub fn cost_of_turn(tier: TierName, model: &CostModel) -> Result<Usd, AdapterError> {
    model
        .per_turn
        .get(&tier)
        .copied()
        .ok_or(AdapterError::UnknownTier(tier))
}
