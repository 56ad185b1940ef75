//! Streaming token model shared by every stage of the pipeline.
//!
//! A stream file carries one pre-tokenized source token per line:
//!
//! ```text
//! utt_id <TAB> ts_ms <TAB> token
//! ```
//!
//! Blank lines are ignored. Timestamps must be non-decreasing across the whole
//! file and a token may not be empty or contain whitespace. Token indices
//! restart at zero for every utterance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StreamError {
    #[error("line {line}: expected 3 tab-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: invalid timestamp {value:?}")]
    BadTimestamp { line: usize, value: String },
    #[error("line {line}: timestamp {ts_ms} is earlier than previous timestamp {prev_ms}")]
    NonMonotone { line: usize, ts_ms: u64, prev_ms: u64 },
    #[error("line {line}: empty token")]
    EmptyToken { line: usize },
    #[error("line {line}: token {token:?} contains whitespace")]
    WhitespaceInToken { line: usize, token: String },
    #[error("line {line}: empty utterance id")]
    EmptyUtterance { line: usize },
    #[error("line {line}: utterance {utt_id:?} resumes after another utterance started")]
    InterleavedUtterance { line: usize, utt_id: String },
    #[error("stream is not valid UTF-8: {0}")]
    Utf8(#[from] std::str::Utf8Error),
}

/// A source token as delivered by an ASR-like feed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub ts_ms: u64,
    pub index: usize,
}

impl Token {
    pub fn new(surface: impl Into<String>, ts_ms: u64, index: usize) -> Self {
        Token {
            surface: surface.into(),
            ts_ms,
            index,
        }
    }
}

/// One parsed record of a stream file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamEvent {
    pub utt_id: String,
    pub token: Token,
}

/// Contiguous run of events sharing an utterance id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub tokens: Vec<Token>,
}

impl Utterance {
    pub fn surfaces(&self) -> Vec<String> {
        surfaces(&self.tokens)
    }
}

pub fn surfaces(tokens: &[Token]) -> Vec<String> {
    tokens.iter().map(|t| t.surface.clone()).collect()
}

/// Renumber token indices to `0..len`, keeping surfaces and timestamps.
pub fn reindex(tokens: &mut [Token]) {
    for (i, t) in tokens.iter_mut().enumerate() {
        t.index = i;
    }
}

/// A detected span of source tokens translated as one chunk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InformationUnit {
    pub tokens: Vec<Token>,
    pub sentence_id: usize,
    /// 0 marks the sentence-initial unit.
    pub iu_index_in_sentence: usize,
    pub is_sentence_final: bool,
    /// Timestamp of the token whose arrival triggered the emission.
    pub decided_at_ms: u64,
}

impl InformationUnit {
    pub fn surfaces(&self) -> Vec<String> {
        surfaces(&self.tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_sentence_initial(&self) -> bool {
        self.iu_index_in_sentence == 0
    }

    /// True when the tokens are non-empty with contiguous increasing indices.
    pub fn is_well_formed(&self) -> bool {
        !self.tokens.is_empty() && self.tokens.windows(2).all(|w| w[1].index == w[0].index + 1)
    }
}

/// One read burst followed by one write burst.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Source tokens read in this segment (LX).
    pub source_len: usize,
    /// Target tokens emitted in this segment (LY).
    pub target_len: usize,
    /// Committed target tokens withdrawn before this segment's emission.
    pub retracted: usize,
    pub read_end_ms: u64,
    pub write_end_ms: u64,
    pub emitted: Vec<String>,
}

/// Interleaved read/write history of one utterance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TranslationTimeline {
    pub segments: Vec<Segment>,
    pub committed_target: Vec<String>,
}

impl TranslationTimeline {
    pub fn lengths(&self) -> Vec<(usize, usize)> {
        self.segments.iter().map(|s| (s.source_len, s.target_len)).collect()
    }

    pub fn retracted_counts(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.retracted).collect()
    }

    pub fn source_consumed(&self) -> usize {
        self.segments.iter().map(|s| s.source_len).sum()
    }

    /// Source tokens read before each emitted target token, in emission order.
    pub fn read_counts(&self) -> Vec<usize> {
        let mut read = 0;
        let mut g = Vec::new();
        for s in &self.segments {
            read += s.source_len;
            g.extend(std::iter::repeat_n(read, s.target_len));
        }
        g
    }
}

/// Parse a stream file. Events come back in file order.
pub fn parse_stream(bytes: &[u8]) -> Result<Vec<StreamEvent>, StreamError> {
    let text = std::str::from_utf8(bytes)?;
    let mut events = Vec::new();
    let mut prev_ts: Option<u64> = None;
    let mut seen_utts: Vec<String> = Vec::new();
    let mut next_index = 0usize;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 3 {
            return Err(StreamError::FieldCount {
                line,
                found: fields.len(),
            });
        }
        let utt_id = fields[0].trim();
        if utt_id.is_empty() {
            return Err(StreamError::EmptyUtterance { line });
        }
        let ts_ms: u64 = fields[1].trim().parse().map_err(|_| StreamError::BadTimestamp {
            line,
            value: fields[1].to_string(),
        })?;
        let token = fields[2].trim();
        if token.is_empty() {
            return Err(StreamError::EmptyToken { line });
        }
        if token.chars().any(char::is_whitespace) {
            return Err(StreamError::WhitespaceInToken {
                line,
                token: token.to_string(),
            });
        }
        if let Some(prev_ms) = prev_ts {
            if ts_ms < prev_ms {
                return Err(StreamError::NonMonotone { line, ts_ms, prev_ms });
            }
        }
        prev_ts = Some(ts_ms);

        match seen_utts.last() {
            Some(last) if last == utt_id => {}
            _ => {
                if seen_utts.iter().any(|u| u == utt_id) {
                    return Err(StreamError::InterleavedUtterance {
                        line,
                        utt_id: utt_id.to_string(),
                    });
                }
                seen_utts.push(utt_id.to_string());
                next_index = 0;
            }
        }

        events.push(StreamEvent {
            utt_id: utt_id.to_string(),
            token: Token::new(token, ts_ms, next_index),
        });
        next_index += 1;
    }
    Ok(events)
}

/// Inverse of [`parse_stream`], one record per line with a trailing newline.
pub fn serialize_stream(events: &[StreamEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.utt_id);
        out.push('\t');
        out.push_str(&e.token.ts_ms.to_string());
        out.push('\t');
        out.push_str(&e.token.surface);
        out.push('\n');
    }
    out
}

/// Group events into utterances, preserving order of appearance.
pub fn group_utterances(events: &[StreamEvent]) -> Vec<Utterance> {
    let mut utts: Vec<Utterance> = Vec::new();
    for e in events {
        match utts.last_mut() {
            Some(u) if u.id == e.utt_id => u.tokens.push(e.token.clone()),
            _ => utts.push(Utterance {
                id: e.utt_id.clone(),
                tokens: vec![e.token.clone()],
            }),
        }
    }
    utts
}
