use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adapters::{AdapterError, ComponentProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TierName {
    Fluid,
    Precise,
    Reasoning,
    DeepReasoning,
    RealtimeBenchmark,
}

impl TierName {
    pub const ALL: [TierName; 5] = [
        TierName::Fluid,
        TierName::Precise,
        TierName::Reasoning,
        TierName::DeepReasoning,
        TierName::RealtimeBenchmark,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TierName::Fluid => "Fluid",
            TierName::Precise => "Precise",
            TierName::Reasoning => "Reasoning",
            TierName::DeepReasoning => "DeepReasoning",
            TierName::RealtimeBenchmark => "RealtimeBenchmark",
        }
    }
}

impl fmt::Display for TierName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for TierName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "fluid" => Ok(TierName::Fluid),
            "precise" => Ok(TierName::Precise),
            "reasoning" => Ok(TierName::Reasoning),
            "deep-reasoning" | "deepreasoning" => Ok(TierName::DeepReasoning),
            "realtime" | "realtime-benchmark" | "realtimebenchmark" => {
                Ok(TierName::RealtimeBenchmark)
            }
            _ => Err(format!("unknown tier {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum TierStages {
    /// ASR, optional transcript repair, reasoning model and TTS in sequence.
    Modular {
        asr: ComponentProfile,
        repair: Option<ComponentProfile>,
        llm: ComponentProfile,
        tts: ComponentProfile,
    },
    /// A single speech-to-speech model with one end-to-end latency.
    Opaque { model: ComponentProfile },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineTier {
    pub name: TierName,
    pub stages: TierStages,
}

impl PipelineTier {
    pub fn modular(
        name: TierName,
        asr: ComponentProfile,
        repair: Option<ComponentProfile>,
        llm: ComponentProfile,
        tts: ComponentProfile,
    ) -> Self {
        PipelineTier {
            name,
            stages: TierStages::Modular {
                asr,
                repair,
                llm,
                tts,
            },
        }
    }

    pub fn preset(name: TierName) -> Self {
        let p = |n: &str| ComponentProfile::preset(n).expect("built-in preset");
        let modular = |asr, repair: Option<&str>, llm| {
            Self::modular(name, p(asr), repair.map(p), p(llm), p("tts-default"))
        };
        match name {
            TierName::Fluid => modular("typhoon", Some("flash-lite-repair"), "flash"),
            TierName::Precise => modular("google-stt-v1", None, "flash"),
            TierName::Reasoning => modular("typhoon", Some("flash-lite-repair"), "gpt5"),
            TierName::DeepReasoning => modular("google-stt-v1", None, "gpt5"),
            TierName::RealtimeBenchmark => PipelineTier {
                name,
                stages: TierStages::Opaque {
                    model: p("gpt-realtime"),
                },
            },
        }
    }

    pub fn validate(&self) -> Result<(), AdapterError> {
        match &self.stages {
            TierStages::Modular {
                asr,
                repair,
                llm,
                tts,
            } => [Some(asr), repair.as_ref(), Some(llm), Some(tts)]
                .into_iter()
                .flatten()
                .try_for_each(ComponentProfile::validate),
            TierStages::Opaque { model } => model.validate(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::rng_stream;
    use crate::time::SimDuration;

    fn constant_sum(tier: &PipelineTier) -> SimDuration {
        let mut rng = rng_stream(0, "", "");
        match &tier.stages {
            TierStages::Modular {
                asr,
                repair,
                llm,
                tts,
            } => [Some(asr), repair.as_ref(), Some(llm), Some(tts)]
                .into_iter()
                .flatten()
                .map(|p| p.latency.sample(&mut rng))
                .sum(),
            TierStages::Opaque { model } => model.latency.sample(&mut rng),
        }
    }

    #[test]
    fn preset_stage_sums() {
        let sum = |n| constant_sum(&PipelineTier::preset(n)).as_ms();
        assert_eq!(sum(TierName::Fluid), 2638.7);
        assert_eq!(sum(TierName::Precise), 4055.8);
        assert_eq!(sum(TierName::Reasoning), 6754.2);
        assert_eq!(sum(TierName::DeepReasoning), 8171.3);
    }

    #[test]
    fn names_parse() {
        for t in TierName::ALL {
            assert_eq!(t.label().parse::<TierName>(), Ok(t));
        }
        assert_eq!("deep-reasoning".parse(), Ok(TierName::DeepReasoning));
        assert_eq!("realtime".parse(), Ok(TierName::RealtimeBenchmark));
        assert!("route".parse::<TierName>().is_err());
    }
}
