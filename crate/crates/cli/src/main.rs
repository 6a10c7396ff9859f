use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use turnsim::floor::DuplexMode;
use turnsim::harness::{
    load_trace, render_table, run_scenario, ExitStatus, PipelineChoice, Report, RunConfig,
    TableFormat, TraceKind,
};
use turnsim::hearing::{normalize_frame, AudioFrame, SignalKind, VadState};
use turnsim::time::VirtualTime;

#[derive(Parser)]
#[command(name = "turnsim", version, about = "Turn-taking latency simulator for cascaded voice agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Half,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Table,
}

impl From<Format> for TableFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => TableFormat::Json,
            Format::Csv => TableFormat::Csv,
            Format::Table => TableFormat::Table,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a trace and print the per-tier summary.
    Run {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// fluid, precise, reasoning, deep-reasoning, realtime or route
        #[arg(long)]
        pipeline: Option<PipelineChoice>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long, value_enum)]
        streaming: Option<Toggle>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the full JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Print the turn boundaries the VAD finds in a frame trace.
    VadCheck {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Re-render one or more saved reports.
    Table {
        #[arg(long, required = true, num_args = 1..)]
        report: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
}

struct Failure(ExitStatus, String);

fn input_error(msg: impl ToString) -> Failure {
    Failure(ExitStatus::InputError, msg.to_string())
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig, Failure> {
    path.map_or(Ok(RunConfig::default()), |p| RunConfig::load(p))
        .map_err(input_error)
}

fn run(cli: Cli) -> Result<String, Failure> {
    match cli.command {
        Command::Run {
            trace,
            config,
            pipeline,
            mode,
            streaming,
            seed,
            report,
            format,
        } => {
            let trace = load_trace(&trace).map_err(input_error)?;
            let mut cfg = load_config(config.as_ref())?;
            if let Some(p) = pipeline {
                cfg.pipeline = p;
            }
            match mode {
                Some(Mode::Half) => cfg.floor.duplex = DuplexMode::HalfDuplex,
                Some(Mode::Full) => cfg.floor.duplex = cfg.full_duplex(),
                None => {}
            }
            if let Some(s) = streaming {
                cfg.streaming = matches!(s, Toggle::On);
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let out = run_scenario(&trace, &cfg)
                .map_err(|e| Failure(ExitStatus::from(&e), e.to_string()))?;
            if let Some(path) = report {
                std::fs::write(&path, out.to_json()).map_err(|e| {
                    Failure(ExitStatus::RuntimeError, format!("{}: {e}", path.display()))
                })?;
            }
            Ok(render_table(&out, format.into()))
        }
        Command::VadCheck { trace, config } => {
            let trace = load_trace(&trace).map_err(input_error)?;
            let cfg = load_config(config.as_ref())?;
            let mut out = String::from("session,t_ms,signal\n");
            for session in trace.sessions() {
                if !trace.is_frame_session(session) {
                    return Err(input_error(format!("session {session} has no frame events")));
                }
                let mut vad = VadState::default();
                for ev in trace.events.iter().filter(|e| &e.session == session) {
                    let TraceKind::Frame { vad_raw, gain, .. } = ev.kind else {
                        continue;
                    };
                    let mut frame = AudioFrame::new(ev.t_ms, session.clone(), vad_raw);
                    frame.gain = gain;
                    let signal = normalize_frame(frame, 1.0)
                        .and_then(|f| vad.step(&f, &cfg.vad))
                        .map_err(|e| Failure(ExitStatus::RuntimeError, e.to_string()))?;
                    if let Some(s) = signal {
                        let kind = match s.kind {
                            SignalKind::TurnStart => "turn_start",
                            SignalKind::TurnEnd => "turn_end",
                        };
                        out += &format!("{session},{},{kind}\n", fmt_ms(s.t));
                    }
                }
            }
            Ok(out)
        }
        Command::Table { report, format } => {
            let reports = report
                .iter()
                .map(|p| {
                    let text = std::fs::read_to_string(p)
                        .map_err(|e| input_error(format!("{}: {e}", p.display())))?;
                    serde_json::from_str::<Report>(&text)
                        .map_err(|e| input_error(format!("{}: {e}", p.display())))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(render_table(&Report::merge(&reports), format.into()))
        }
    }
}

fn fmt_ms(t: VirtualTime) -> String {
    format!("{:.1}", t.as_ms())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(ExitStatus::InputError as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(Failure(status, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(status as u8)
        }
    }
}
