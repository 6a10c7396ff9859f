//! Heuristic aggregator between a token-streaming LLM and TTS.
//!
//! Tokens are buffered into speakable chunks. A chunk is cut when a
//! delimiter closes a long-enough segment, when the buffer reaches
//! `max_chars` (cutting at the best safe boundary: delimiter, then
//! whitespace, then a lexicon segmentation boundary for continuous script,
//! then a token boundary), or when the oldest buffered character has waited
//! `max_buffer_wait`. A cut is never placed inside an occurrence of a
//! protected term; while the stream is open, a cut that a future token could
//! turn into such a split is deferred.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{SimDuration, VirtualTime};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AggregatorError {
    #[error("buffer of {len} chars has no safe cut within {max_chars} chars")]
    Oversize { len: usize, max_chars: usize },
    #[error("token at {got} arrived before the previous token at {prev}")]
    OutOfOrder { prev: VirtualTime, got: VirtualTime },
    #[error("invalid chunk policy: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenEvent {
    pub t: VirtualTime,
    pub text: String,
}

impl TokenEvent {
    pub fn new(t: VirtualTime, text: impl Into<String>) -> Self {
        TokenEvent {
            t,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChunkPolicy {
    pub min_chars: usize,
    pub max_chars: usize,
    pub delimiters: Vec<char>,
    #[serde(rename = "max_buffer_wait_ms")]
    pub max_buffer_wait: SimDuration,
    pub protected_lexicon: Vec<String>,
    pub continuous_script: bool,
}

impl Default for ChunkPolicy {
    fn default() -> Self {
        ChunkPolicy {
            min_chars: 12,
            max_chars: 80,
            delimiters: vec!['.', '!', '?', ';', '\n'],
            max_buffer_wait: SimDuration::from_ms(400),
            protected_lexicon: Vec::new(),
            continuous_script: false,
        }
    }
}

impl ChunkPolicy {
    pub fn validate(&self) -> Result<(), AggregatorError> {
        if self.min_chars == 0 {
            return Err(AggregatorError::Config("min_chars must be positive".into()));
        }
        if self.max_chars < self.min_chars {
            return Err(AggregatorError::Config("max_chars must be >= min_chars".into()));
        }
        if let Some(term) = self
            .protected_lexicon
            .iter()
            .find(|t| t.chars().count() > self.max_chars)
        {
            return Err(AggregatorError::Config(format!(
                "protected term {term:?} is longer than max_chars"
            )));
        }
        if self.protected_lexicon.iter().any(String::is_empty) {
            return Err(AggregatorError::Config("empty protected term".into()));
        }
        Ok(())
    }

    fn is_delimiter(&self, c: char) -> bool {
        self.delimiters.contains(&c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChunkReason {
    Delimiter,
    MaxSize,
    Staleness,
    Flush,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeechChunk {
    pub text: String,
    pub t_emitted: VirtualTime,
    pub reason: ChunkReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Safety {
    Safe,
    Unsafe,
    /// Depends on text that has not arrived yet.
    Undecided,
}

/// Whether cutting `text` at byte offset `p` could split a protected term.
fn cut_safety(text: &str, p: usize, lexicon: &[String], stream_open: bool) -> Safety {
    let (before, after) = text.split_at(p);
    let mut verdict = Safety::Safe;
    for term in lexicon {
        for (k, _) in term.char_indices().skip(1) {
            let (u, v) = term.split_at(k);
            if !before.ends_with(u) {
                continue;
            }
            if after.starts_with(v) {
                return Safety::Unsafe;
            }
            if stream_open && v.starts_with(after) {
                verdict = Safety::Undecided;
            }
        }
    }
    verdict
}

/// Greedy longest-match segmentation against the lexicon. Characters not
/// covered by a term form single-character segments. Returns segment end
/// offsets in bytes.
pub fn longest_match_boundaries(text: &str, lexicon: &[String]) -> Vec<usize> {
    let mut ends = Vec::new();
    let mut i = 0;
    while i < text.len() {
        let rest = &text[i..];
        let matched = lexicon
            .iter()
            .filter(|t| rest.starts_with(t.as_str()))
            .map(String::len)
            .max();
        let step = matched.unwrap_or_else(|| rest.chars().next().map_or(1, char::len_utf8));
        i += step;
        ends.push(i);
    }
    ends
}

/// Byte ranges of every protected-term occurrence, overlapping ones included.
pub fn protected_occurrences(text: &str, lexicon: &[String]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for term in lexicon.iter().filter(|t| !t.is_empty()) {
        let mut from = 0;
        while let Some(pos) = text[from..].find(term.as_str()) {
            let start = from + pos;
            out.push((start, start + term.len()));
            from = start + text[start..].chars().next().map_or(1, char::len_utf8);
        }
    }
    out.sort_unstable();
    out
}

/// Streaming chunk buffer for one response.
#[derive(Debug, Clone, Default)]
pub struct ChunkBuffer {
    text: String,
    /// Byte offset of each buffered token's first char, with its arrival
    /// time. The first entry always starts at 0 while the buffer is
    /// non-empty.
    arrivals: Vec<(usize, VirtualTime)>,
    last_t: Option<VirtualTime>,
    last_emit: Option<VirtualTime>,
}

impl ChunkBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn buffered(&self) -> &str {
        &self.text
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }

    /// Time at which the staleness timer of the oldest buffered char expires.
    pub fn next_deadline(&self, policy: &ChunkPolicy) -> Option<VirtualTime> {
        self.arrivals.first().map(|&(_, t)| t + policy.max_buffer_wait)
    }

    pub fn push_token(
        &mut self,
        token: &TokenEvent,
        policy: &ChunkPolicy,
    ) -> Result<Vec<SpeechChunk>, AggregatorError> {
        if let Some(prev) = self.last_t {
            if token.t < prev {
                return Err(AggregatorError::OutOfOrder { prev, got: token.t });
            }
        }
        let mut out = self.advance_to(token.t, policy)?;
        self.last_t = Some(token.t);
        if !token.text.is_empty() {
            self.arrivals.push((self.text.len(), token.t));
            self.text.push_str(&token.text);
        }
        self.evaluate(token.t, policy, true, &mut out)?;
        Ok(out)
    }

    /// Fires staleness timers that expire strictly before `now`.
    pub fn advance_to(
        &mut self,
        now: VirtualTime,
        policy: &ChunkPolicy,
    ) -> Result<Vec<SpeechChunk>, AggregatorError> {
        let mut out = Vec::new();
        while let Some(deadline) = self.next_deadline(policy) {
            if deadline >= now {
                break;
            }
            let at = self.last_emit.map_or(deadline, |e| e.max(deadline));
            let before = out.len();
            self.evaluate(at, policy, true, &mut out)?;
            if out.len() == before {
                break;
            }
        }
        Ok(out)
    }

    /// Emits whatever is left, regardless of size.
    pub fn flush(&mut self, now: VirtualTime) -> Option<SpeechChunk> {
        if self.text.is_empty() {
            return None;
        }
        let text = std::mem::take(&mut self.text);
        self.arrivals.clear();
        self.last_emit = Some(now);
        Some(SpeechChunk {
            text,
            t_emitted: now,
            reason: ChunkReason::Flush,
        })
    }

    /// End of stream at `now`: pending timers, then the flush.
    pub fn finish(
        &mut self,
        now: VirtualTime,
        policy: &ChunkPolicy,
    ) -> Result<Vec<SpeechChunk>, AggregatorError> {
        let mut out = self.advance_to(now, policy)?;
        out.extend(self.flush(now));
        Ok(out)
    }

    fn emit(&mut self, p: usize, at: VirtualTime, reason: ChunkReason) -> SpeechChunk {
        let rest = self.text.split_off(p);
        let text = std::mem::replace(&mut self.text, rest);
        let keep_from = self.arrivals.iter().rposition(|&(off, _)| off <= p).unwrap_or(0);
        self.arrivals.drain(..keep_from);
        for entry in &mut self.arrivals {
            entry.0 = entry.0.saturating_sub(p);
        }
        if self.text.is_empty() {
            self.arrivals.clear();
        }
        self.last_emit = Some(at);
        SpeechChunk {
            text,
            t_emitted: at,
            reason,
        }
    }

    fn evaluate(
        &mut self,
        now: VirtualTime,
        policy: &ChunkPolicy,
        timed: bool,
        out: &mut Vec<SpeechChunk>,
    ) -> Result<(), AggregatorError> {
        loop {
            if self.text.is_empty() {
                return Ok(());
            }
            if let Some(p) = self.delimiter_cut(policy) {
                out.push(self.emit(p, now, ChunkReason::Delimiter));
                continue;
            }
            let len = self.text.chars().count();
            if len >= policy.max_chars {
                match self.best_cut(policy, false)? {
                    Some(p) => {
                        out.push(self.emit(p, now, ChunkReason::MaxSize));
                        continue;
                    }
                    None => return Ok(()),
                }
            }
            let stale = timed
                && self
                    .next_deadline(policy)
                    .is_some_and(|deadline| deadline <= now);
            if stale && len >= policy.min_chars {
                if let Some(p) = self.best_cut(policy, true)? {
                    out.push(self.emit(p, now, ChunkReason::Staleness));
                    continue;
                }
            }
            return Ok(());
        }
    }

    /// Earliest safe cut right after a delimiter (plus any trailing
    /// delimiters and whitespace) that yields a chunk within the size bounds.
    fn delimiter_cut(&self, policy: &ChunkPolicy) -> Option<usize> {
        let mut chars = 0usize;
        let mut iter = self.text.char_indices().peekable();
        while let Some((i, c)) = iter.next() {
            chars += 1;
            if chars > policy.max_chars {
                return None;
            }
            if !policy.is_delimiter(c) {
                continue;
            }
            let mut p = i + c.len_utf8();
            let mut n = chars;
            while let Some(&(j, d)) = iter.peek() {
                if n >= policy.max_chars || !(d.is_whitespace() || policy.is_delimiter(d)) {
                    break;
                }
                iter.next();
                n += 1;
                p = j + d.len_utf8();
            }
            chars = n;
            if n >= policy.min_chars
                && cut_safety(&self.text, p, &policy.protected_lexicon, true) == Safety::Safe
            {
                return Some(p);
            }
        }
        None
    }

    /// Best boundary for a size- or staleness-driven cut. Preference runs
    /// delimiter, whitespace, lexicon segment, then token boundary; a cut
    /// shorter than `min_chars` is the last resort. Errors only when no
    /// boundary up to `max_chars` can ever become safe.
    fn best_cut(
        &self,
        policy: &ChunkPolicy,
        prefer_whole: bool,
    ) -> Result<Option<usize>, AggregatorError> {
        let lexicon = &policy.protected_lexicon;
        let seg_ends = if policy.continuous_script {
            longest_match_boundaries(&self.text, lexicon)
        } else {
            Vec::new()
        };
        let token_starts: Vec<usize> = self.arrivals.iter().map(|&(off, _)| off).collect();

        if prefer_whole
            && self.text.chars().count() <= policy.max_chars
            && cut_safety(&self.text, self.text.len(), lexicon, true) == Safety::Safe
        {
            return Ok(Some(self.text.len()));
        }

        let mut best: Option<(u8, usize)> = None;
        let mut short: Option<usize> = None;
        let mut undecided = false;
        let mut prev: Option<char> = None;
        let mut last_non_ws: Option<char> = None;
        let mut chars = 0usize;
        let bounds = self
            .text
            .char_indices()
            .map(|(i, c)| (i, Some(c)))
            .chain(std::iter::once((self.text.len(), None)));
        for (p, c) in bounds {
            if chars > policy.max_chars {
                break;
            }
            let rank = match prev {
                _ if p == 0 => None,
                Some(pc) if policy.is_delimiter(pc) => Some(3),
                Some(pc) if pc.is_whitespace() => {
                    if last_non_ws.is_some_and(|l| policy.is_delimiter(l)) {
                        Some(3)
                    } else {
                        Some(2)
                    }
                }
                _ if policy.continuous_script && seg_ends.binary_search(&p).is_ok() => Some(1),
                _ if p == self.text.len() || token_starts.binary_search(&p).is_ok() => Some(0),
                _ => None,
            };
            if let Some(rank) = rank {
                match cut_safety(&self.text, p, lexicon, true) {
                    Safety::Safe if chars >= policy.min_chars => {
                        if best.is_none_or(|(r, _)| rank >= r) {
                            best = Some((rank, p));
                        }
                    }
                    Safety::Safe => short = Some(p),
                    Safety::Undecided if chars >= policy.min_chars => undecided = true,
                    Safety::Undecided | Safety::Unsafe => {}
                }
            }
            if let Some(c) = c {
                chars += 1;
                if let Some(pc) = prev {
                    if !pc.is_whitespace() {
                        last_non_ws = Some(pc);
                    }
                }
                prev = Some(c);
            }
        }
        match best {
            Some((_, p)) => Ok(Some(p)),
            None if undecided || prefer_whole => Ok(None),
            // No boundary in [min_chars, max_chars]; min_chars gives way.
            None if short.is_some() => Ok(short),
            None => Err(AggregatorError::Oversize {
                len: self.text.chars().count(),
                max_chars: policy.max_chars,
            }),
        }
    }
}

/// Cut offsets (chunk end byte offsets, the last one equal to `text.len()`)
/// that the streaming aggregator produces when `text` arrives as a single
/// token and the stream then ends.
pub fn segment(text: &str, policy: &ChunkPolicy) -> Result<Vec<usize>, AggregatorError> {
    Ok(chunk_text(text, policy)?
        .iter()
        .scan(0, |end, c| {
            *end += c.text.len();
            Some(*end)
        })
        .collect())
}

/// Untimed chunking of a complete text.
pub fn chunk_text(text: &str, policy: &ChunkPolicy) -> Result<Vec<SpeechChunk>, AggregatorError> {
    let mut buf = ChunkBuffer::new();
    let mut out = Vec::new();
    if !text.is_empty() {
        buf.arrivals.push((0, VirtualTime::ZERO));
        buf.text.push_str(text);
    }
    buf.evaluate(VirtualTime::ZERO, policy, false, &mut out)?;
    out.extend(buf.flush(VirtualTime::ZERO));
    Ok(out)
}

/// Runs a complete timed token stream that ends at `end`.
pub fn chunk_stream(
    tokens: &[TokenEvent],
    end: VirtualTime,
    policy: &ChunkPolicy,
) -> Result<Vec<SpeechChunk>, AggregatorError> {
    let mut buf = ChunkBuffer::new();
    let mut out = Vec::new();
    for tok in tokens {
        out.extend(buf.push_token(tok, policy)?);
    }
    out.extend(buf.finish(end, policy)?);
    Ok(out)
}
