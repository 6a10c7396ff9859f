use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::{ComponentProfile, CorruptionModel, CostModel, LlmSettings};
use crate::aggregator::ChunkPolicy;
use crate::floor::{DuplexMode, FloorConfig};
use crate::hearing::VadConfig;
use crate::orchestrator::{
    default_phatic_lexicon, PipelineTier, RagConfig, RoutingPolicy, TierName, TierStages,
    DEFAULT_GATE_CAPACITY,
};
use crate::repair::{PhraseSet, RepairConfig};
use crate::time::SimDuration;

pub const DEFAULT_INTERRUPT_LATENCY: SimDuration = SimDuration::from_ms(50);

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Which tier handles each turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PipelineChoice {
    Fixed(TierName),
    /// Classify every turn and pick the tier from the routing policy.
    Route,
}

impl Default for PipelineChoice {
    fn default() -> Self {
        PipelineChoice::Fixed(TierName::Fluid)
    }
}

impl FromStr for PipelineChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("route") {
            Ok(PipelineChoice::Route)
        } else {
            s.parse().map(PipelineChoice::Fixed)
        }
    }
}

impl TryFrom<String> for PipelineChoice {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<PipelineChoice> for String {
    fn from(p: PipelineChoice) -> String {
        p.to_string()
    }
}

impl fmt::Display for PipelineChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineChoice::Route => f.write_str("route"),
            PipelineChoice::Fixed(t) => {
                let s = serde_json::to_value(t).expect("tier names serialize");
                f.write_str(s.as_str().unwrap_or_default())
            }
        }
    }
}

/// A component given either as a preset name or inline.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Preset(String),
    Inline(ComponentProfile),
}

impl ProfileSpec {
    fn resolve(&self) -> Result<ComponentProfile, ConfigError> {
        match self {
            ProfileSpec::Preset(name) => ComponentProfile::preset(name)
                .map_err(|e| ConfigError::Invalid(e.to_string())),
            ProfileSpec::Inline(p) => Ok(p.clone()),
        }
    }
}

/// Overrides on top of a tier preset. `repair = "none"` removes the repair
/// stage.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TierOverride {
    pub asr: Option<ProfileSpec>,
    pub repair: Option<ProfileSpec>,
    pub llm: Option<ProfileSpec>,
    pub tts: Option<ProfileSpec>,
    pub model: Option<ProfileSpec>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub pipeline: PipelineChoice,
    pub streaming: bool,
    pub gate_capacity: usize,
    #[serde(rename = "history_fetch_ms")]
    pub history_fetch: SimDuration,
    /// Ignored user speech is said again once the agent stops talking.
    pub repeat_ignored_speech: bool,
    /// When set, every modular ASR stage corrupts phrase-set terms at this
    /// rate.
    pub asr_corruption_rate: Option<f64>,
    /// Phrase-set canonicals are added to the chunker's protected lexicon.
    pub protect_phrase_terms: bool,
    pub floor: FloorConfig,
    pub vad: VadConfig,
    pub chunking: ChunkPolicy,
    pub llm: LlmSettings,
    pub repair: RepairConfig,
    pub phrase_set: PhraseSet,
    pub rag: RagConfig,
    pub routing: RoutingPolicy,
    pub phatic_lexicon: Vec<String>,
    pub costs: CostModel,
    pub tiers: BTreeMap<TierName, TierOverride>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            pipeline: PipelineChoice::default(),
            streaming: false,
            gate_capacity: DEFAULT_GATE_CAPACITY,
            history_fetch: SimDuration::ZERO,
            repeat_ignored_speech: true,
            asr_corruption_rate: None,
            protect_phrase_terms: true,
            floor: FloorConfig::default(),
            vad: VadConfig::default(),
            chunking: ChunkPolicy::default(),
            llm: LlmSettings::default(),
            repair: RepairConfig::default(),
            phrase_set: PhraseSet::default(),
            rag: RagConfig::default(),
            routing: RoutingPolicy::default(),
            phatic_lexicon: default_phatic_lexicon(),
            costs: CostModel::default(),
            tiers: BTreeMap::new(),
        }
    }
}

fn invalid(e: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid(e.to_string())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.gate_capacity == 0 {
            return Err(invalid("gate_capacity must be positive"));
        }
        if let Some(rate) = self.asr_corruption_rate {
            if !(0.0..=1.0).contains(&rate) {
                return Err(invalid("asr_corruption_rate must be within [0, 1]"));
            }
        }
        self.vad.validate().map_err(invalid)?;
        self.chunk_policy().validate().map_err(invalid)?;
        self.phrase_set.validate().map_err(invalid)?;
        if !self.phrase_set.is_empty() {
            self.repair.validate(&self.phrase_set).map_err(invalid)?;
        }
        self.rag.validate().map_err(invalid)?;
        for name in TierName::ALL {
            self.tier(name)?.validate().map_err(invalid)?;
        }
        Ok(())
    }

    /// The chunking policy in effect, including protected phrase terms.
    pub fn chunk_policy(&self) -> ChunkPolicy {
        let mut policy = self.chunking.clone();
        if self.protect_phrase_terms {
            for term in self.phrase_set.canonicals() {
                if !policy.protected_lexicon.iter().any(|t| t == term) {
                    policy.protected_lexicon.push(term.to_owned());
                }
            }
        }
        policy
    }

    /// The duplex mode for `--mode full`: the configured barge-in latency if
    /// the config already enables barge-in, otherwise the default.
    pub fn full_duplex(&self) -> DuplexMode {
        match self.floor.duplex {
            full @ DuplexMode::FullDuplexBargeIn { .. } => full,
            DuplexMode::HalfDuplex => DuplexMode::FullDuplexBargeIn {
                interrupt_latency: DEFAULT_INTERRUPT_LATENCY,
            },
        }
    }

    /// The preset tier with any configured overrides applied.
    pub fn tier(&self, name: TierName) -> Result<PipelineTier, ConfigError> {
        let mut tier = PipelineTier::preset(name);
        if let Some(o) = self.tiers.get(&name) {
            match &mut tier.stages {
                TierStages::Modular {
                    asr,
                    repair,
                    llm,
                    tts,
                } => {
                    if o.model.is_some() {
                        return Err(invalid(format!("{name}: `model` is only valid for opaque tiers")));
                    }
                    if let Some(s) = &o.asr {
                        *asr = s.resolve()?;
                    }
                    match &o.repair {
                        Some(ProfileSpec::Preset(n)) if n == "none" => *repair = None,
                        Some(s) => *repair = Some(s.resolve()?),
                        None => {}
                    }
                    if let Some(s) = &o.llm {
                        *llm = s.resolve()?;
                    }
                    if let Some(s) = &o.tts {
                        *tts = s.resolve()?;
                    }
                }
                TierStages::Opaque { model } => {
                    if o.asr.is_some() || o.repair.is_some() || o.llm.is_some() || o.tts.is_some() {
                        return Err(invalid(format!("{name}: opaque tiers only take `model`")));
                    }
                    if let Some(s) = &o.model {
                        *model = s.resolve()?;
                    }
                }
            }
        }
        if let (Some(rate), TierStages::Modular { asr, .. }) =
            (self.asr_corruption_rate, &mut tier.stages)
        {
            asr.corruption = Some(CorruptionModel {
                phrase_set: self.phrase_set.clone(),
                corruption_rate: rate,
            });
        }
        Ok(tier)
    }
}
