//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use turnsim::adapters::{corrupt_text, ComponentProfile, CostModel, LlmSettings};
use turnsim::aggregator::{chunk_stream, ChunkPolicy, ChunkReason, TokenEvent};
use turnsim::event::SessionId;
use turnsim::floor::{DuplexMode, RequestId};
use turnsim::harness::{
    load_trace, run_scenario, LogEvent, PipelineChoice, Report, RunConfig, Trace, TraceEvent,
    TraceKind,
};
use turnsim::hearing::{detect_signals, smooth, AudioFrame, FloorSignal, SignalKind, VadConfig};
use turnsim::orchestrator::{
    run_turn, ConversationStore, PipelineTier, RagChunk, RagConfig, TierName, TierStages,
    TurnRequest, TurnSettings,
};
use turnsim::repair::{
    correction_score, normalized_wer, repair_transcript, PhraseEntry, PhraseSet, RepairConfig,
};
use turnsim::time::{SimDuration, VirtualTime};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);
type Entries<'a> = &'a [(&'a str, &'a [&'a str])];

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn load(name: &str) -> (Trace, RunConfig) {
    let trace = load_trace(&scenario(&format!("{name}.jsonl"))).expect("shipped trace");
    let config = scenario(&format!("{name}.toml"));
    let cfg = if config.exists() {
        RunConfig::load(&config).expect("shipped config")
    } else {
        RunConfig::default()
    };
    (trace, cfg)
}

fn run(trace: &Trace, cfg: &RunConfig) -> Report {
    run_scenario(trace, cfg).expect("scenario runs")
}

fn ms(t: u64) -> SimDuration {
    SimDuration::from_ms(t)
}

fn tenths(t: u64) -> SimDuration {
    SimDuration::from_ticks(t)
}

// AC-1
fn table1_tiers() -> Verdict {
    let (trace, base) = load("table1");
    let cases = [
        (TierName::Fluid, 26_387, 2000, 3000),
        (TierName::Precise, 40_558, 3000, 5000),
        (TierName::Reasoning, 67_542, 5000, 7000),
        (TierName::DeepReasoning, 81_713, 8000, 9000),
    ];
    let mut seen = Vec::new();
    for (tier, want, lo, hi) in cases {
        let cfg = RunConfig {
            pipeline: PipelineChoice::Fixed(tier),
            ..base.clone()
        };
        let report = run(&trace, &cfg);
        let delay = report.turns[0].turn_delay_ms.ok_or("turn did not complete")?;
        ensure(delay == tenths(want), || format!("{tier} = {delay}, expected {}", tenths(want)))?;
        ensure(delay >= ms(lo) && delay <= ms(hi), || format!("{tier} outside {lo}-{hi} ms"))?;
        seen.push(format!("{tier} {delay}"));
    }
    Ok(seen.join(", "))
}

// AC-2
fn hybrid_sub_pipeline() -> Verdict {
    let cfg = RunConfig::default();
    let TierStages::Modular { asr, repair: Some(repair), .. } = cfg.tier(TierName::Fluid).map_err(|e| e.to_string())?.stages
    else {
        return Err("fluid tier has no repair stage".into());
    };
    let TierStages::Modular { asr: precise_asr, .. } = cfg.tier(TierName::Precise).map_err(|e| e.to_string())?.stages
    else {
        return Err("precise tier is not modular".into());
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let hybrid = asr.latency.sample(&mut rng) + repair.latency.sample(&mut rng);
    let precise = precise_asr.latency.sample(&mut rng);
    ensure(hybrid == tenths(10_401), || format!("fast ASR + repair = {hybrid}"))?;
    ensure((hybrid.as_ms() - 1040.0).abs() <= 0.5, || "not within 0.5 ms of 1040".into())?;
    ensure(hybrid.as_ms() < 0.5 * precise.as_ms(), || "not under half the precise ASR".into())?;

    // and the same numbers through a full run
    let (trace, _) = load("table1");
    let t = &run(&trace, &cfg).turns[0];
    ensure(t.asr_ms + t.repair_ms == hybrid, || "run metrics disagree".into())?;
    Ok(format!("{hybrid} < 0.5 x {precise}"))
}

// AC-3
fn cost_table() -> Verdict {
    let (trace, base) = load("table1");
    let mut micros = Vec::new();
    for (tier, want) in [
        (TierName::Fluid, 1000),
        (TierName::Precise, 2300),
        (TierName::Reasoning, 4600),
        (TierName::RealtimeBenchmark, 15_400),
    ] {
        let cfg = RunConfig {
            pipeline: PipelineChoice::Fixed(tier),
            ..base.clone()
        };
        let row = &run(&trace, &cfg).summary.tiers[0];
        ensure(row.tier == tier && row.cost_per_turn_usd.micros() == want, || {
            format!("{tier} costs {}", row.cost_per_turn_usd)
        })?;
        micros.push(want);
    }
    let ratio = micros[3] as f64 / micros[0] as f64;
    ensure(ratio >= 15.0 && (ratio - 15.4).abs() < 1e-12, || format!("ratio {ratio}"))?;
    Ok(format!("0.0010/0.0023/0.0046/0.0154 USD, ratio {ratio:.1}"))
}

// AC-4
fn repair_rigidity() -> Verdict {
    let (trace, base) = load("repair-rigidity");
    let barge = trace
        .events
        .iter()
        .find(|e| matches!(e.kind, TraceKind::BargeIn { .. }))
        .ok_or("trace has no barge-in")?
        .t_ms;
    let wrong = &run(&trace, &base).turns[0];
    let playback = wrong.playback_end_ms.zip(wrong.first_audio_ms).map(|(e, s)| e - s);
    ensure(playback == Some(ms(10_000)), || format!("wrong answer plays {playback:?}"))?;
    ensure(wrong.stage_sum() == ms(2000), || format!("stages take {}", wrong.stage_sum()))?;

    let correction = |duplex: DuplexMode| -> Result<SimDuration, String> {
        let cfg = RunConfig {
            floor: turnsim::floor::FloorConfig { duplex, ..base.floor },
            ..base.clone()
        };
        let report = run(&trace, &cfg);
        let fix = report.turns.get(1).ok_or("no correction turn")?;
        Ok(fix.first_audio_ms.ok_or("correction never answered")?.since(barge))
    };
    let half = correction(DuplexMode::HalfDuplex)?;
    let full = correction(DuplexMode::FullDuplexBargeIn { interrupt_latency: ms(50) })?;
    ensure(half >= ms(12_000), || format!("half duplex {half}"))?;
    ensure(full <= ms(3500), || format!("full duplex {full}"))?;
    let ratio = half.as_ms() / full.as_ms();
    ensure(ratio >= 3.0, || format!("ratio {ratio}"))?;
    Ok(format!("half {half}, full {full}, ratio {ratio:.2}"))
}

fn one_turn_trace(duration_ms: u64) -> Trace {
    Trace {
        events: vec![TraceEvent {
            t_ms: VirtualTime::ZERO,
            session: SessionId::new("caller"),
            kind: TraceKind::Utterance {
                text: "is the cluster healthy".into(),
                duration_ms: ms(duration_ms),
                prosody: Default::default(),
            },
        }],
    }
}

/// A Fluid tier whose whole processing time is `d` (all of it ASR).
fn processing_config(d: SimDuration) -> RunConfig {
    let toml = format!(
        "[tiers.fluid]\nasr = {{ latency = {{ constant = {} }} }}\nrepair = \"none\"\n\
         llm = {{ latency = {{ constant = 0 }} }}\ntts = {{ latency = {{ constant = 0 }} }}\n",
        d.as_ms()
    );
    RunConfig::from_toml(&toml).expect("valid config")
}

// AC-5
fn filler_threshold() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut durations: Vec<u64> = vec![0, 10_000, 29_999, 30_000, 30_001, 50_000, 81_713];
    durations.extend((0..200).map(|_| rng.random_range(0..100_000)));
    for ticks in &durations {
        let d = tenths(*ticks);
        let report = run(&one_turn_trace(500), &processing_config(d));
        let turn = &report.turns[0];
        ensure(turn.turn_delay_ms == Some(d), || format!("processing took {:?}, not {d}", turn.turn_delay_ms))?;
        let filler = report.log.iter().position(|e| matches!(e.event, LogEvent::Filler { .. }));
        let audio = report.log.iter().position(|e| matches!(e.event, LogEvent::PlaybackStart { .. }));
        ensure(filler.is_some() == (d >= ms(3000)), || format!("d = {d}: filler {filler:?}"))?;
        if let (Some(f), Some(a)) = (filler, audio) {
            ensure(f < a, || format!("d = {d}: filler after first audio"))?;
        }
    }
    Ok(format!("{} durations, boundary at 3000.0 ms", durations.len()))
}

// AC-6
fn cancel_on_speech() -> Verdict {
    let (trace, cfg) = load("cancel-on-speech");
    let report = run(&trace, &cfg);
    let first = &report.turns[0];
    let barge = trace.events[1].t_ms;
    ensure(barge.since(first.turn_end_ms) == ms(3500), || format!("barge-in at {barge}"))?;
    ensure(first.canceled, || "first turn not canceled".into())?;
    let played_first = report
        .log
        .iter()
        .any(|e| e.event == LogEvent::PlaybackStart { request: RequestId(0) });
    ensure(!played_first, || "canceled request played audio".into())?;
    let baseline = first.turn_end_ms + tenths(81_713);
    let restart = report.turns.get(1).and_then(|t| t.first_audio_ms).ok_or("restart never answered")?;
    ensure(restart > baseline, || format!("restart answered at {restart}, baseline {baseline}"))?;
    Ok(format!("restart first audio {restart} > baseline {baseline}"))
}

fn frames(values: &[f64], period: SimDuration) -> Vec<AudioFrame> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| AudioFrame::new(VirtualTime::from_ticks(i as u64 * period.ticks()), SessionId::new("s"), v))
        .collect()
}

fn signals(values: &[f64], cfg: &VadConfig) -> Vec<FloorSignal> {
    detect_signals(&frames(values, cfg.frame_period), cfg).expect("valid frames")
}

fn first_of(sig: &[FloorSignal], kind: SignalKind) -> Option<VirtualTime> {
    sig.iter().find(|s| s.kind == kind).map(|s| s.t)
}

fn random_vad(rng: &mut ChaCha8Rng) -> (VadConfig, Vec<f64>) {
    let theta_end = rng.random_range(0.05..0.8);
    let cfg = VadConfig {
        alpha: rng.random_range(0.05..=1.0),
        theta_start: rng.random_range(theta_end + 0.01..=1.0),
        theta_end,
        start_frames: rng.random_range(1..6),
        hangover: ms(20 * rng.random_range(1..40)),
        frame_period: ms(20),
    };
    let mut values = Vec::new();
    for _ in 0..rng.random_range(1..12) {
        let speech = rng.random_bool(0.5);
        let jitter = rng.random_range(0.0..0.35);
        for k in 0..rng.random_range(1..60) {
            let base = if speech { 1.0 - jitter } else { jitter };
            values.push(if k % 7 == 3 { 1.0 - base } else { base });
        }
    }
    (cfg, values)
}

// AC-7
fn vad_suite() -> Verdict {
    // hand-derived examples
    let sharp = VadConfig { alpha: 1.0, ..VadConfig::default() };
    ensure(signals(&[0.0; 500], &VadConfig::default()).is_empty(), || "silence signaled".into())?;
    let start = signals(&[1.0; 5], &sharp);
    ensure(start.len() == 1 && start[0].t == VirtualTime::from_ms(40), || format!("constant 1.0: {start:?}"))?;
    let hang_frames = (sharp.hangover.ticks() / sharp.frame_period.ticks()) as usize;
    let mut pause = vec![1.0; 10];
    pause.extend(std::iter::repeat_n(0.1, hang_frames - 1));
    pause.extend(std::iter::repeat_n(1.0, 10));
    ensure(signals(&pause, &sharp).len() == 1, || "micro-pause ended the turn".into())?;
    let mut sustained = vec![1.0; 10];
    sustained.extend(std::iter::repeat_n(0.1, 40));
    let end = signals(&sustained, &sharp);
    ensure(
        end.len() == 2 && end[1].kind == SignalKind::TurnEnd && end[1].t == VirtualTime::from_ms(180) + sharp.hangover,
        || format!("sustained silence: {end:?}"),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..1000 {
        let (cfg, values) = random_vad(&mut rng);
        let sig = signals(&values, &cfg);
        let alternates = sig.iter().enumerate().all(|(i, s)| {
            s.kind == if i % 2 == 0 { SignalKind::TurnStart } else { SignalKind::TurnEnd }
        });
        ensure(alternates, || format!("case {case}: signals do not alternate"))?;

        let stricter = VadConfig { theta_start: (cfg.theta_start + rng.random_range(0.0..0.3)).min(1.0), ..cfg.clone() };
        let a = first_of(&sig, SignalKind::TurnStart);
        let b = first_of(&signals(&values, &stricter), SignalKind::TurnStart);
        ensure(b.is_none() || a.is_some_and(|a| b >= Some(a)), || format!("case {case}: higher theta_start started earlier"))?;

        let lower = VadConfig { theta_end: cfg.theta_end * rng.random_range(0.0..1.0), ..cfg.clone() };
        let a = first_of(&sig, SignalKind::TurnEnd);
        let b = first_of(&signals(&values, &lower), SignalKind::TurnEnd);
        ensure(b.is_none() || a.is_some_and(|a| b >= Some(a)), || format!("case {case}: lower theta_end ended earlier"))?;

        // micro-pause immunity with no smoothing lag
        let sharp = VadConfig { alpha: 1.0, ..cfg.clone() };
        let hang = (sharp.hangover.ticks() / sharp.frame_period.ticks()) as usize;
        if hang >= 2 {
            let low = rng.random_range(0.0..=sharp.theta_end);
            let mut v = vec![1.0; sharp.start_frames as usize + 3];
            v.extend(std::iter::repeat_n(low, hang - 1));
            v.extend(std::iter::repeat_n(1.0, 5));
            ensure(signals(&v, &sharp).len() == 1, || format!("case {case}: micro-pause split the turn"))?;
        }

        // chatter bound: oscillation that never crosses theta_end cannot end a turn,
        // and one that never reaches theta_start cannot start one
        let (x, y) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        let lift = |u: f64| cfg.theta_end + 1e-9 + u * (1.0 - cfg.theta_end - 1e-9);
        let above: Vec<f64> = (0..200).map(|i| lift(if i % 2 == 0 { x } else { y })).collect();
        let chatter = signals(&above, &cfg);
        ensure(chatter.len() <= 1, || format!("case {case}: chatter above theta_end produced {chatter:?}"))?;
        let below: Vec<f64> = (0..200).map(|i| (if i % 2 == 0 { x } else { y }) * cfg.theta_start * 0.999).collect();
        let mut s = 0.0;
        let quiet = below.iter().all(|&v| {
            s = smooth(s, v, cfg.alpha);
            s < cfg.theta_start
        });
        ensure(!quiet || signals(&below, &cfg).is_empty(), || format!("case {case}: quiet chatter started a turn"))?;
    }
    Ok("4 hand examples, 1000 random sequences".into())
}

fn random_stream(rng: &mut ChaCha8Rng) -> (Vec<TokenEvent>, VirtualTime, ChunkPolicy) {
    let word = |rng: &mut ChaCha8Rng, lo: usize, hi: usize, alphabet: &[u8]| -> String {
        (0..rng.random_range(lo..=hi))
            .map(|_| alphabet[rng.random_range(0..alphabet.len())] as char)
            .collect()
    };
    let mut t = 0;
    let mut prev_bare = false;
    let mut tokens = Vec::new();
    for _ in 0..rng.random_range(0..50) {
        let w = word(rng, 1, 8, b"abcde");
        let sep = rng.random_range(0..4);
        let bare = sep == 0 && !prev_bare;
        prev_bare = bare;
        let text = match (bare, sep) {
            (true, _) => w,
            (false, 1) => w + ". ",
            (false, _) => w + " ",
        };
        t += rng.random_range(0..300);
        tokens.push(TokenEvent::new(VirtualTime::from_ms(t), text));
    }
    let lexicon = (0..rng.random_range(0..4)).map(|_| word(rng, 2, 10, b"abcde.")).collect();
    let min = rng.random_range(1..16);
    let policy = ChunkPolicy {
        min_chars: min,
        max_chars: min + rng.random_range(17..55),
        max_buffer_wait: ms(rng.random_range(0..800)),
        protected_lexicon: lexicon,
        ..ChunkPolicy::default()
    };
    (tokens, VirtualTime::from_ms(t + rng.random_range(0..500)), policy)
}

fn streaming_vs_batch(text: &str, llm_ticks: u64, tts_ticks: u64) -> Result<(usize, bool), String> {
    let phrase_set = PhraseSet::default();
    let repair = RepairConfig::default();
    let rag = RagConfig {
        documents: vec![RagChunk { doc_id: "d".into(), text: text.into() }],
        ..RagConfig::default()
    };
    let chunk_policy = ChunkPolicy { min_chars: 8, max_chars: 40, ..ChunkPolicy::default() };
    let llm = LlmSettings::default();
    let costs = CostModel::default();
    let tier = PipelineTier::modular(
        TierName::Fluid,
        ComponentProfile::constant("asr", 100.0),
        None,
        ComponentProfile::constant("llm", tenths(llm_ticks).as_ms()),
        ComponentProfile::constant("tts", tenths(tts_ticks).as_ms()),
    );
    let req = TurnRequest {
        session: SessionId::new("s"),
        request_id: RequestId(0),
        turn_index: 0,
        transcript: text.into(),
        prosody: Default::default(),
        t_submitted: VirtualTime::ZERO,
    };
    let store = ConversationStore::new(SimDuration::ZERO);
    let outcome = |streaming| {
        let settings = TurnSettings {
            phrase_set: &phrase_set,
            repair: &repair,
            rag: &rag,
            chunk_policy: &chunk_policy,
            llm: &llm,
            streaming,
            costs: &costs,
        };
        run_turn(&req, &tier, VirtualTime::ZERO, &store, settings, &mut ChaCha8Rng::seed_from_u64(0))
            .map_err(|e| e.to_string())
    };
    let (stream, batch) = (outcome(true)?, outcome(false)?);
    Ok((stream.chunks.len(), stream.timeline.first_audio < batch.timeline.first_audio))
}

// AC-8
fn aggregator_suite() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut multi = 0;
    for case in 0..1000 {
        let (tokens, end, policy) = random_stream(&mut rng);
        let chunks = chunk_stream(&tokens, end, &policy).map_err(|e| format!("case {case}: {e}"))?;
        let input: String = tokens.iter().map(|t| t.text.as_str()).collect();
        let output: String = chunks.iter().map(|c| c.text.as_str()).collect();
        ensure(input == output, || format!("case {case}: output differs from input"))?;
        for c in chunks.iter().filter(|c| c.reason != ChunkReason::Flush) {
            let n = c.text.chars().count();
            ensure(n >= policy.min_chars && n <= policy.max_chars, || format!("case {case}: chunk of {n} chars"))?;
        }
        let cuts: Vec<usize> = chunks
            .iter()
            .scan(0, |at, c| {
                *at += c.text.len();
                Some(*at)
            })
            .collect();
        for term in &policy.protected_lexicon {
            for (s, e) in common::occurrences(&input, term) {
                ensure(cuts.iter().all(|&c| c <= s || c >= e), || format!("case {case}: {term:?} split"))?;
            }
        }
        let faster = ChunkPolicy {
            max_buffer_wait: SimDuration::from_ticks(policy.max_buffer_wait.ticks() / 2),
            ..policy.clone()
        };
        let quick = chunk_stream(&tokens, end, &faster).map_err(|e| e.to_string())?;
        if let (Some(a), Some(b)) = (quick.first(), chunks.first()) {
            ensure(a.t_emitted <= b.t_emitted, || format!("case {case}: shorter wait emitted later"))?;
        }

        if !input.trim().is_empty() {
            let (n, faster) = streaming_vs_batch(&input, rng.random_range(1..60_000), rng.random_range(0..8000))?;
            if n >= 2 {
                multi += 1;
                ensure(faster, || format!("case {case}: streaming not faster with {n} chunks"))?;
            }
        }
    }
    Ok(format!("1000 streams, {multi} multi-chunk responses streamed faster"))
}

// AC-9
fn repair_and_wer() -> Verdict {
    let mut seqs: Vec<Vec<&str>> = vec![Vec::new()];
    let mut frontier = seqs.clone();
    for _ in 0..6 {
        frontier = frontier
            .iter()
            .flat_map(|s| ["a", "b", "c"].map(|w| [s.as_slice(), &[w]].concat()))
            .collect();
        seqs.extend(frontier.iter().cloned());
    }
    let joined: Vec<String> = seqs.iter().map(|s| s.join(" ")).collect();
    for (r, rs) in seqs.iter().zip(&joined) {
        for (h, hs) in seqs.iter().zip(&joined) {
            let w = normalized_wer(rs, hs);
            if w.edits != common::full_matrix_distance(r, h) || w.reference_words != r.len() {
                return Err(format!("WER mismatch for {rs:?} vs {hs:?}"));
            }
        }
    }

    let entries = |pairs: &[(&str, &[&str])]| -> Vec<(String, Vec<String>)> {
        pairs
            .iter()
            .map(|(c, vs)| (c.to_string(), vs.iter().map(|v| v.to_string()).collect()))
            .collect()
    };
    let set = |e: &[(String, Vec<String>)]| PhraseSet {
        entries: e.iter().map(|(c, vs)| PhraseEntry { canonical: c.clone(), variants: vs.clone() }).collect(),
    };
    let cfg = RepairConfig::default();
    let examples: [(Entries, &str, &str); 3] = [
        (&[("Azure", &["a sure"])], "deploy on a sure", "deploy on Azure"),
        (&[("AWS", &["a double u s"])], "move it to a double u s today", "move it to AWS today"),
        (&[("PostgreSQL", &["post gress"]), ("SQL", &["gress"])], "post gress", "PostgreSQL"),
    ];
    for (pairs, input, want) in examples {
        let e = entries(pairs);
        let got = repair_transcript(input, &set(&e), &cfg).corrected;
        let oracle = common::repair_oracle(input, &e, cfg.max_norm_edit_distance, cfg.max_window_tokens);
        ensure(got == want && oracle == want, || format!("{input:?}: got {got:?}, oracle {oracle:?}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let letters = b"abcdef";
    let word = |rng: &mut ChaCha8Rng| -> String {
        (0..rng.random_range(1..=4)).map(|_| letters[rng.random_range(0..5)] as char).collect()
    };
    for case in 0..500 {
        let e: Vec<(String, Vec<String>)> = (0..rng.random_range(0..5))
            .map(|i| {
                let variants = (0..rng.random_range(1..3))
                    .map(|_| (0..rng.random_range(1..4)).map(|_| word(&mut rng)).collect::<Vec<_>>().join(" "))
                    .collect();
                (format!("ZZZ{i}"), variants)
            })
            .collect();
        let text = (0..rng.random_range(0..12)).map(|_| word(&mut rng)).collect::<Vec<_>>().join(" ");
        let got = repair_transcript(&text, &set(&e), &cfg).corrected;
        let want = common::repair_oracle(&text, &e, cfg.max_norm_edit_distance, cfg.max_window_tokens);
        ensure(got == want, || format!("case {case}: {text:?} -> {got:?}, oracle {want:?}"))?;
    }

    let ps = PhraseSet::new(vec![
        PhraseEntry::new("Azure", &["a sure", "อะชัวร์"]),
        PhraseEntry::new("PostgreSQL", &["post gres", "โพสเกรส"]),
        PhraseEntry::new("Kubernetes", &["cooper net ease", "คูเบอร์เนตีส"]),
        PhraseEntry::new("CrashLoopBackOff", &["crash loop back off"]),
    ])
    .map_err(|e| e.to_string())?;
    let fillers = ["ช่วย", "deploy", "บน", "ให้หน่อย", "backup", "อยู่ที่ไหน", "the", "cluster"];
    let canonicals: Vec<&str> = ps.canonicals().collect();
    let testset: Vec<(String, String)> = (0..50)
        .map(|_| {
            let mut words: Vec<&str> = (0..rng.random_range(1..6)).map(|_| fillers[rng.random_range(0..fillers.len())]).collect();
            let term = canonicals[rng.random_range(0..canonicals.len())];
            let at = rng.random_range(0..=words.len());
            words.insert(at, term);
            let gold = words.join(" ");
            let (corrupted, n) = corrupt_text(&gold, &ps, 1.0, &mut rng);
            assert_eq!(n, 1);
            (corrupted, gold)
        })
        .collect();
    let exact = RepairConfig { max_norm_edit_distance: 0.0, ..RepairConfig::default() };
    let score = correction_score(&testset, &ps, &exact).map_err(|e| e.to_string())?;
    ensure(score.value() == 1.0, || format!("round trip score {}", score.value()))?;
    Ok(format!("{} WER pairs exhaustive, 503 repair cases, round trip 50/50", seqs.len() * seqs.len()))
}

fn simultaneous_turns(sessions: &[(u64, u64)], capacity: usize) -> Report {
    let mut events: Vec<TraceEvent> = sessions
        .iter()
        .enumerate()
        .map(|(i, &(at, dur))| TraceEvent {
            t_ms: VirtualTime::from_ms(at),
            session: SessionId::new(format!("s{i:02}")),
            kind: TraceKind::Utterance {
                text: "what is the status of the deployment".into(),
                duration_ms: ms(dur),
                prosody: Default::default(),
            },
        })
        .collect();
    events.sort_by_key(|e| e.t_ms);
    let cfg = RunConfig { gate_capacity: capacity, ..RunConfig::default() };
    run(&Trace { events }, &cfg)
}

// AC-10
fn gate_fairness() -> Verdict {
    let service = tenths(26_387);
    for k in 1..=6 {
        let report = simultaneous_turns(&vec![(0, 1000); k], 1);
        let mut waits: Vec<SimDuration> = report.turns.iter().map(|t| t.queue_wait_ms).collect();
        waits.sort();
        let want: Vec<SimDuration> = (0..k as u64).map(|i| SimDuration::from_ticks(service.ticks() * i)).collect();
        ensure(waits == want, || format!("k = {k}: waits {waits:?}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for schedule in 0..100 {
        let n = rng.random_range(1..12);
        let arrivals: Vec<(u64, u64)> = (0..n).map(|_| (rng.random_range(0..10_000), rng.random_range(100..2000))).collect();
        let report = simultaneous_turns(&arrivals, rng.random_range(1..4));
        let mut queued = Vec::new();
        let mut admitted = Vec::new();
        for e in &report.log {
            match e.event {
                LogEvent::Queued { request } => queued.push((e.session.clone(), request)),
                LogEvent::Admitted { request } if queued.contains(&(e.session.clone(), request)) => {
                    admitted.push((e.session.clone(), request))
                }
                _ => {}
            }
        }
        ensure(admitted == queued, || format!("schedule {schedule}: admission order {admitted:?} vs queue {queued:?}"))?;
        ensure(report.summary.completed == n, || format!("schedule {schedule}: {} of {n} completed", report.summary.completed))?;
    }
    Ok(format!("waits 0..5T with T = {service}; 100 schedules starvation-free"))
}

// AC-11
fn determinism() -> Verdict {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(scenario("")).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        if path.extension().is_some_and(|e| e == "jsonl") {
            names.push(path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_owned());
        }
    }
    names.sort();
    for name in &names {
        let (trace, cfg) = load(name);
        ensure(run(&trace, &cfg).to_json() == run(&trace, &cfg).to_json(), || format!("{name} differs"))?;
    }
    Ok(format!("{} shipped scenarios", names.len()))
}

// AC-12
fn routing() -> Verdict {
    let (trace, mut cfg) = load("routing");
    cfg.routing = Default::default();
    let report = run(&trace, &cfg);
    let tier_of = |session: &str| {
        report
            .turns
            .iter()
            .find(|t| t.session.as_str() == session)
            .map(|t| t.tier)
    };
    let hello = trace.events.iter().find(|e| matches!(&e.kind, TraceKind::Utterance { text, .. } if text == "Hello"));
    ensure(hello.is_some_and(|e| e.session.as_str() == "greeting"), || "trace lost its greeting".into())?;
    ensure(tier_of("greeting") == Some(TierName::Fluid), || format!("Hello -> {:?}", tier_of("greeting")))?;
    ensure(tier_of("support") == Some(TierName::Precise), || format!("jargon -> {:?}", tier_of("support")))?;
    Ok("Hello -> Fluid, jargon query -> Precise".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("tier latencies", table1_tiers),
        ("hybrid ASR+repair sub-pipeline", hybrid_sub_pipeline),
        ("cost table", cost_table),
        ("half-duplex repair rigidity", repair_rigidity),
        ("filler threshold", filler_threshold),
        ("cancel on speech", cancel_on_speech),
        ("VAD property suite", vad_suite),
        ("aggregator property suite", aggregator_suite),
        ("repair and WER", repair_and_wer),
        ("orchestrator gate", gate_fairness),
        ("determinism", determinism),
        ("routing", routing),
    ];
    assert!(Path::new(&scenario("")).is_dir(), "scenarios directory missing");
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let started = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match verdict {
            Ok(detail) => println!("AC-{} PASS {name}: {detail} [{:.0?}]", i + 1, started.elapsed()),
            Err(why) => {
                failed += 1;
                println!("AC-{} FAIL {name}: {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
