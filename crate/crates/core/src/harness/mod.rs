//! Trace ingestion, run configuration, scenario execution and reporting.

mod config;
mod report;
mod scenario;
mod trace;

pub use config::{
    ConfigError, PipelineChoice, ProfileSpec, RunConfig, TierOverride, DEFAULT_INTERRUPT_LATENCY,
};
pub use report::{
    nearest_rank, render_table, summarize, DelayStats, LogEntry, LogEvent, Report, Summary,
    TableFormat, TierRow,
};
pub use scenario::{run_scenario, ScenarioError};
pub use trace::{load_trace, parse_trace, Trace, TraceError, TraceEvent, TraceKind};

/// Process exit status for the command-line front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    InputError = 1,
    RuntimeError = 2,
}

impl From<&ScenarioError> for ExitStatus {
    fn from(e: &ScenarioError) -> Self {
        match e {
            ScenarioError::Config(_) => ExitStatus::InputError,
            ScenarioError::Event(_) | ScenarioError::Gate(_) => ExitStatus::RuntimeError,
        }
    }
}
