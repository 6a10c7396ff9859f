use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adapters::Usd;
use crate::event::SessionId;
use crate::floor::RequestId;
use crate::orchestrator::{TierName, TurnMetrics};
use crate::time::{SimDuration, VirtualTime};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    TurnStart,
    TurnEnd,
    Dispatch { request: RequestId, tier: TierName },
    Queued { request: RequestId },
    Admitted { request: RequestId },
    SpeechIgnored,
    FollowUpBuffered,
    Filler { request: RequestId },
    Cancel { request: RequestId },
    PlaybackStart { request: RequestId },
    PlaybackHalted { request: RequestId },
    PlaybackEnd { request: RequestId },
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub t_ms: VirtualTime,
    pub session: SessionId,
    #[serde(flatten)]
    pub event: LogEvent,
}

/// Turn-delay statistics over completed turns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    pub mean_ms: f64,
    pub p50_ms: SimDuration,
    pub p95_ms: SimDuration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierRow {
    pub tier: TierName,
    pub turns: usize,
    pub cost_per_turn_usd: Usd,
    pub turn_delay: Option<DelayStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// No turn produced a turn delay; all statistics are absent.
    pub empty: bool,
    pub turns: usize,
    pub completed: usize,
    pub canceled: usize,
    pub errors: usize,
    pub turn_delay: Option<DelayStats>,
    pub total_cost_usd: Usd,
    pub tiers: Vec<TierRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub pipeline: String,
    pub mode: String,
    pub streaming: bool,
    pub turns: Vec<TurnMetrics>,
    pub log: Vec<LogEntry>,
    pub summary: Summary,
}

impl Report {
    pub fn new(seed: u64, pipeline: String, mode: String, streaming: bool) -> Self {
        Report {
            seed,
            pipeline,
            mode,
            streaming,
            turns: Vec::new(),
            log: Vec::new(),
            summary: summarize(&[]),
        }
    }

    /// Concatenates several runs into one report, e.g. one run per tier.
    pub fn merge(reports: &[Report]) -> Report {
        let join = |f: fn(&Report) -> &str| {
            let mut parts: Vec<&str> = reports.iter().map(f).collect();
            parts.dedup();
            parts.join("+")
        };
        let mut merged = Report::new(
            reports.first().map_or(0, |r| r.seed),
            join(|r| &r.pipeline),
            join(|r| &r.mode),
            reports.iter().any(|r| r.streaming),
        );
        for r in reports {
            merged.turns.extend(r.turns.iter().cloned());
            merged.log.extend(r.log.iter().cloned());
        }
        merged.summary = summarize(&merged.turns);
        merged
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }
}

/// Nearest-rank percentile of an ascending slice.
pub fn nearest_rank(sorted: &[SimDuration], pct: u32) -> Option<SimDuration> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (pct as usize * sorted.len()).div_ceil(100).max(1);
    Some(sorted[rank - 1])
}

fn delay_stats(mut delays: Vec<SimDuration>) -> Option<DelayStats> {
    delays.sort();
    let n = delays.len() as u64;
    let total: u64 = delays.iter().map(|d| d.ticks()).sum();
    Some(DelayStats {
        p50_ms: nearest_rank(&delays, 50)?,
        p95_ms: nearest_rank(&delays, 95)?,
        mean_ms: SimDuration::from_ticks(total).as_ms() / n as f64,
    })
}

pub fn summarize(turns: &[TurnMetrics]) -> Summary {
    let delays: Vec<SimDuration> = turns.iter().filter_map(|t| t.turn_delay_ms).collect();
    let mut tiers: Vec<TierName> = turns.iter().map(|t| t.tier).collect();
    tiers.sort();
    tiers.dedup();
    let rows = tiers
        .into_iter()
        .map(|tier| {
            let rows: Vec<&TurnMetrics> = turns.iter().filter(|t| t.tier == tier).collect();
            TierRow {
                tier,
                turns: rows.len(),
                cost_per_turn_usd: rows.iter().map(|t| t.cost_usd).max().unwrap_or_default(),
                turn_delay: delay_stats(rows.iter().filter_map(|t| t.turn_delay_ms).collect()),
            }
        })
        .collect();
    Summary {
        empty: delays.is_empty(),
        turns: turns.len(),
        completed: delays.len(),
        canceled: turns.iter().filter(|t| t.canceled).count(),
        errors: turns.iter().filter(|t| t.error.is_some()).count(),
        turn_delay: delay_stats(delays),
        total_cost_usd: turns.iter().map(|t| t.cost_usd).sum(),
        tiers: rows,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Json,
    Csv,
    Table,
}

impl FromStr for TableFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(TableFormat::Json),
            "csv" => Ok(TableFormat::Csv),
            "table" => Ok(TableFormat::Table),
            _ => Err(format!("unknown format {s:?}")),
        }
    }
}

const COLUMNS: [&str; 6] = [
    "tier",
    "cost_per_turn_usd",
    "turns",
    "mean_turn_delay_ms",
    "p50_turn_delay_ms",
    "p95_turn_delay_ms",
];

fn row_cells(row: &TierRow) -> [String; 6] {
    let stat = |f: fn(&DelayStats) -> String| row.turn_delay.as_ref().map_or("-".into(), f);
    [
        row.tier.to_string(),
        format!("{:.4}", row.cost_per_turn_usd.dollars()),
        row.turns.to_string(),
        stat(|s| format!("{:.1}", s.mean_ms)),
        stat(|s| format!("{:.1}", s.p50_ms.as_ms())),
        stat(|s| format!("{:.1}", s.p95_ms.as_ms())),
    ]
}

/// Renders the per-tier summary. Column order is fixed.
pub fn render_table(report: &Report, format: TableFormat) -> String {
    let summary = &report.summary;
    match format {
        TableFormat::Json => serde_json::to_string_pretty(summary).expect("summary serializes") + "\n",
        TableFormat::Csv => {
            let mut out = COLUMNS.join(",") + "\n";
            for row in &summary.tiers {
                out += &(row_cells(row).join(",") + "\n");
            }
            out
        }
        TableFormat::Table => {
            let rows: Vec<[String; 6]> = summary.tiers.iter().map(row_cells).collect();
            let widths: Vec<usize> = (0..COLUMNS.len())
                .map(|i| rows.iter().map(|r| r[i].len()).chain([COLUMNS[i].len()]).max().unwrap_or(0))
                .collect();
            let mut out = String::new();
            let mut line = |cells: Vec<&str>| {
                let padded: Vec<String> = cells
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:<w$}"))
                    .collect();
                let _ = writeln!(out, "{}", padded.join("  ").trim_end());
            };
            line(COLUMNS.to_vec());
            for r in &rows {
                line(r.iter().map(String::as_str).collect());
            }
            out
        }
    }
}
