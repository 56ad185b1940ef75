//! Dynamic-context boundary detection for information units.
//!
//! The detector keeps a buffer of undecided tokens and an anchor position in
//! it. Each time a token arrives the anchor is scored against the tokens that
//! follow it (the dynamic context):
//!
//! * `p >= delta1`: everything up to and including the anchor is emitted as a
//!   unit and detection restarts on the remainder;
//! * `p < delta2`: the anchor moves one token to the right;
//! * otherwise the detector waits for another token, unless the context has
//!   already reached `max_dynamic_context`, in which case whichever of the two
//!   decisions has the higher probability is taken.
//!
//! Emitted units are never revised.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::stream::{InformationUnit, Token};

/// Separator inserted between the prefix and the dynamic context in training samples.
pub const SEP: &str = "SEP";

#[derive(Debug, Error, PartialEq)]
pub enum DetectorError {
    #[error("thresholds must satisfy 0 <= delta2 < delta1 <= 1 (got delta1={delta1}, delta2={delta2})")]
    Thresholds { delta1: f64, delta2: f64 },
    #[error("boundary {boundary} out of range for a sentence of {len} tokens")]
    BoundaryOutOfRange { boundary: usize, len: usize },
    #[error("boundaries must be strictly increasing")]
    UnsortedBoundaries,
    #[error("cannot train a scorer on an empty corpus")]
    EmptyCorpus,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Probability that the anchor closes an information unit.
pub trait BoundaryScorer: Send + Sync {
    /// `prefix` ends with the anchor, which sits at `anchor_position` in it.
    fn score(&self, prefix: &[String], anchor_position: usize, context: &[String]) -> f64;
}

impl<S: BoundaryScorer + ?Sized> BoundaryScorer for &S {
    fn score(&self, prefix: &[String], anchor_position: usize, context: &[String]) -> f64 {
        (**self).score(prefix, anchor_position, context)
    }
}

impl<S: BoundaryScorer + ?Sized> BoundaryScorer for Box<S> {
    fn score(&self, prefix: &[String], anchor_position: usize, context: &[String]) -> f64 {
        (**self).score(prefix, anchor_position, context)
    }
}

const PUNCTUATION: &[&str] = &["，", "。", "！", "？", "；", "：", "、", ",", ".", "!", "?", ";", ":"];
const SENTENCE_FINAL: &[&str] = &["。", "！", "？", ".", "!", "?"];

pub fn is_punctuation(token: &str) -> bool {
    PUNCTUATION.contains(&token)
}

pub fn is_comma(token: &str) -> bool {
    matches!(token, "，" | "," | "、")
}

pub fn default_sentence_final() -> HashSet<String> {
    SENTENCE_FINAL.iter().map(|s| s.to_string()).collect()
}

/// Returns 1.0 when the anchor is a punctuation token and 0.0 otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct PunctuationScorer;

impl BoundaryScorer for PunctuationScorer {
    fn score(&self, prefix: &[String], anchor_position: usize, _context: &[String]) -> f64 {
        if is_punctuation(&prefix[anchor_position]) {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    delta1: f64,
    delta2: f64,
    pub max_dynamic_context: usize,
    /// Tokens that close a sentence when they end an emitted unit.
    pub sentence_final: HashSet<String>,
}

impl DetectorConfig {
    pub fn new(delta1: f64, delta2: f64, max_dynamic_context: usize) -> Result<Self, DetectorError> {
        let valid = (0.0..=1.0).contains(&delta2) && delta1 > 0.0 && delta1 <= 1.0 && delta2 < delta1;
        if !valid {
            return Err(DetectorError::Thresholds { delta1, delta2 });
        }
        Ok(DetectorConfig {
            delta1,
            delta2,
            max_dynamic_context,
            sentence_final: default_sentence_final(),
        })
    }

    pub fn delta1(&self) -> f64 {
        self.delta1
    }

    pub fn delta2(&self) -> f64 {
        self.delta2
    }
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig::new(0.7, 0.3, 5).expect("default thresholds are valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Decision {
    Complete,
    Incomplete,
    Wait,
}

fn decide(config: &DetectorConfig, p: f64, context_len: usize) -> Decision {
    if p >= config.delta1 {
        Decision::Complete
    } else if p < config.delta2 {
        Decision::Incomplete
    } else if context_len >= config.max_dynamic_context {
        if p >= 0.5 {
            Decision::Complete
        } else {
            Decision::Incomplete
        }
    } else {
        Decision::Wait
    }
}

/// Undecided buffer plus sentence/unit counters for one stream.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectorState {
    pub buffer: Vec<Token>,
    pub anchor_index: usize,
    pub sentence_id: usize,
    pub iu_in_sentence: usize,
}

impl DetectorState {
    pub fn new() -> Self {
        Self::default()
    }

    fn make_unit(
        &mut self,
        tokens: Vec<Token>,
        config: &DetectorConfig,
        decided_at_ms: u64,
        force_final: bool,
    ) -> InformationUnit {
        let ends_sentence = force_final
            || tokens
                .last()
                .is_some_and(|t| config.sentence_final.contains(&t.surface));
        let iu = InformationUnit {
            tokens,
            sentence_id: self.sentence_id,
            iu_index_in_sentence: self.iu_in_sentence,
            is_sentence_final: ends_sentence,
            decided_at_ms,
        };
        if ends_sentence {
            self.sentence_id += 1;
            self.iu_in_sentence = 0;
        } else {
            self.iu_in_sentence += 1;
        }
        iu
    }
}

/// Boundary detector over a borrowed configuration and scorer.
pub struct Detector<'a, S: BoundaryScorer + ?Sized> {
    pub config: &'a DetectorConfig,
    pub scorer: &'a S,
}

impl<'a, S: BoundaryScorer + ?Sized> Detector<'a, S> {
    pub fn new(config: &'a DetectorConfig, scorer: &'a S) -> Self {
        Detector { config, scorer }
    }

    /// Append one token and emit every unit that becomes complete.
    pub fn step(&self, state: &mut DetectorState, token: Token) -> Vec<InformationUnit> {
        let decided_at = token.ts_ms;
        state.buffer.push(token);
        let mut out = Vec::new();
        loop {
            if state.buffer.is_empty() || state.anchor_index >= state.buffer.len() {
                break;
            }
            let surfaces: Vec<String> = state.buffer.iter().map(|t| t.surface.clone()).collect();
            let t = state.anchor_index;
            let p = self.scorer.score(&surfaces[..=t], t, &surfaces[t + 1..]);
            match decide(self.config, p, surfaces.len() - t - 1) {
                Decision::Complete => {
                    let rest = state.buffer.split_off(t + 1);
                    let unit_tokens = std::mem::replace(&mut state.buffer, rest);
                    state.anchor_index = 0;
                    out.push(state.make_unit(unit_tokens, self.config, decided_at, false));
                }
                Decision::Incomplete => state.anchor_index += 1,
                Decision::Wait => break,
            }
        }
        out
    }

    pub fn step_many(
        &self,
        state: &mut DetectorState,
        tokens: impl IntoIterator<Item = Token>,
    ) -> Vec<InformationUnit> {
        tokens.into_iter().flat_map(|t| self.step(state, t)).collect()
    }

    /// End of stream: whatever is still buffered becomes a sentence-final unit.
    pub fn flush(&self, state: &mut DetectorState) -> Option<InformationUnit> {
        if state.buffer.is_empty() {
            return None;
        }
        let tokens = std::mem::take(&mut state.buffer);
        let decided_at = tokens.last().map_or(0, |t| t.ts_ms);
        state.anchor_index = 0;
        Some(state.make_unit(tokens, self.config, decided_at, true))
    }

    /// Segment a complete token sequence, returning units and the undecided residue.
    ///
    /// Walks the sequence with explicit indices and replays the arrival order,
    /// so it must agree with feeding the same tokens through [`Detector::step`].
    pub fn segment_offline(&self, tokens: &[Token]) -> (Vec<InformationUnit>, Vec<Token>) {
        let surfaces: Vec<String> = tokens.iter().map(|t| t.surface.clone()).collect();
        let mut state = DetectorState::new();
        let mut units = Vec::new();
        let mut start = 0;
        let mut anchor = 0;
        // `seen` is the number of tokens that have arrived so far.
        let mut seen = 1.min(tokens.len());
        while seen > 0 && start < seen {
            if anchor >= seen {
                if seen == tokens.len() {
                    break;
                }
                seen += 1;
                continue;
            }
            let p = self
                .scorer
                .score(&surfaces[start..=anchor], anchor - start, &surfaces[anchor + 1..seen]);
            match decide(self.config, p, seen - anchor - 1) {
                Decision::Complete => {
                    let unit = tokens[start..=anchor].to_vec();
                    units.push(state.make_unit(unit, self.config, tokens[seen - 1].ts_ms, false));
                    start = anchor + 1;
                    anchor = start;
                    if start >= seen && seen < tokens.len() {
                        seen += 1;
                    }
                }
                Decision::Incomplete => anchor += 1,
                Decision::Wait => {
                    if seen == tokens.len() {
                        break;
                    }
                    seen += 1;
                }
            }
        }
        (units, tokens[start.min(tokens.len())..].to_vec())
    }
}

/// Label of a detector training sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SampleLabel {
    Negative,
    Positive,
}

/// `prefix SEP context` with a boundary label for the last prefix token.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TrainingSample {
    pub prefix: Vec<String>,
    pub context: Vec<String>,
    pub label: SampleLabel,
}

impl TrainingSample {
    /// Tokens in training format with [`SEP`] between prefix and context.
    pub fn tokens(&self) -> Vec<String> {
        let mut v = self.prefix.clone();
        v.push(SEP.to_string());
        v.extend(self.context.iter().cloned());
        v
    }

    pub fn to_line(&self) -> String {
        let label = match self.label {
            SampleLabel::Positive => "1",
            SampleLabel::Negative => "0",
        };
        format!("{label}\t{}", self.tokens().join(" "))
    }

    pub fn from_line(line: &str, lineno: usize) -> Result<Self, DetectorError> {
        let err = |msg: &str| DetectorError::Parse {
            line: lineno,
            msg: msg.to_string(),
        };
        let (label, rest) = line.split_once('\t').ok_or_else(|| err("missing TAB after label"))?;
        let label = match label.trim() {
            "1" => SampleLabel::Positive,
            "0" => SampleLabel::Negative,
            _ => return Err(err("label must be 0 or 1")),
        };
        let toks: Vec<&str> = rest.split_whitespace().collect();
        let sep = toks.iter().position(|t| *t == SEP).ok_or_else(|| err("missing SEP"))?;
        if sep == 0 {
            return Err(err("empty prefix"));
        }
        Ok(TrainingSample {
            prefix: toks[..sep].iter().map(|s| s.to_string()).collect(),
            context: toks[sep + 1..].iter().map(|s| s.to_string()).collect(),
            label,
        })
    }
}

/// Build detector training samples from one punctuation-free sentence.
///
/// `boundaries` are token counts at which a sub-sentence ends. Within every
/// span between boundaries, each proper prefix followed by its next token is a
/// negative sample. At each interior boundary, the span followed by every
/// non-empty prefix of the next span is a positive sample.
pub fn make_training_samples(sentence: &[String], boundaries: &[usize]) -> Result<Vec<TrainingSample>, DetectorError> {
    let n = sentence.len();
    for (i, &b) in boundaries.iter().enumerate() {
        if b == 0 || b > n {
            return Err(DetectorError::BoundaryOutOfRange { boundary: b, len: n });
        }
        if i > 0 && boundaries[i - 1] >= b {
            return Err(DetectorError::UnsortedBoundaries);
        }
    }
    let mut cuts: Vec<usize> = vec![0];
    cuts.extend(boundaries.iter().copied().filter(|&b| b < n));
    cuts.push(n);

    let mut samples = Vec::new();
    for w in 0..cuts.len() - 1 {
        let (start, end) = (cuts[w], cuts[w + 1]);
        for p in start + 1..end {
            samples.push(TrainingSample {
                prefix: sentence[start..p].to_vec(),
                context: vec![sentence[p].clone()],
                label: SampleLabel::Negative,
            });
        }
        if end < n {
            let next_end = cuts[w + 2];
            for c in end + 1..=next_end {
                samples.push(TrainingSample {
                    prefix: sentence[start..end].to_vec(),
                    context: sentence[end..c].to_vec(),
                    label: SampleLabel::Positive,
                });
            }
        }
    }
    Ok(samples)
}

/// Split a punctuated sentence into bare tokens plus the boundaries the
/// punctuation marked. A trailing mark is not an interior boundary.
pub fn strip_punctuation(tokens: &[String]) -> (Vec<String>, Vec<usize>) {
    let mut bare = Vec::new();
    let mut boundaries = Vec::new();
    for t in tokens {
        if is_punctuation(t) {
            if !bare.is_empty() && boundaries.last() != Some(&bare.len()) {
                boundaries.push(bare.len());
            }
        } else {
            bare.push(t.clone());
        }
    }
    if boundaries.last() == Some(&bare.len()) {
        boundaries.pop();
    }
    (bare, boundaries)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct LabelCounts {
    positive: u64,
    total: u64,
}

impl LabelCounts {
    fn add(&mut self, label: SampleLabel) {
        self.total += 1;
        if label == SampleLabel::Positive {
            self.positive += 1;
        }
    }

    fn rate(&self) -> f64 {
        self.positive as f64 / self.total as f64
    }
}

const NO_CONTEXT: &str = "<none>";

/// Count-based stand-in for a fine-tuned boundary classifier.
///
/// Estimates the positive rate for the (anchor, first context token) pair and
/// interpolates it with the anchor-only rate and the corpus prior using a fixed
/// weight. Only relative frequencies enter the estimate, so replicating the
/// training corpus leaves every score unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceScorer {
    lambda: f64,
    prior: LabelCounts,
    anchor: BTreeMap<String, LabelCounts>,
    pair: BTreeMap<(String, String), LabelCounts>,
}

const SCORER_MAGIC: &str = "simtrans-iu-scorer";
const SCORER_VERSION: u32 = 1;

impl ReferenceScorer {
    pub const DEFAULT_LAMBDA: f64 = 0.9;

    pub fn train(samples: &[TrainingSample]) -> Result<Self, DetectorError> {
        Self::train_with_lambda(samples, Self::DEFAULT_LAMBDA)
    }

    pub fn train_with_lambda(samples: &[TrainingSample], lambda: f64) -> Result<Self, DetectorError> {
        if samples.is_empty() {
            return Err(DetectorError::EmptyCorpus);
        }
        let mut scorer = ReferenceScorer {
            lambda,
            prior: LabelCounts::default(),
            anchor: BTreeMap::new(),
            pair: BTreeMap::new(),
        };
        for s in samples {
            let Some(anchor) = s.prefix.last() else { continue };
            let next = s.context.first().map_or(NO_CONTEXT, String::as_str);
            scorer.prior.add(s.label);
            scorer.anchor.entry(anchor.clone()).or_default().add(s.label);
            scorer
                .pair
                .entry((anchor.clone(), next.to_string()))
                .or_default()
                .add(s.label);
        }
        if scorer.prior.total == 0 {
            return Err(DetectorError::EmptyCorpus);
        }
        Ok(scorer)
    }

    fn probability(&self, anchor: &str, next: &str) -> f64 {
        let prior = self.prior.rate();
        let anchor_p = match self.anchor.get(anchor) {
            Some(c) => self.lambda * c.rate() + (1.0 - self.lambda) * prior,
            None => prior,
        };
        match self.pair.get(&(anchor.to_string(), next.to_string())) {
            Some(c) => self.lambda * c.rate() + (1.0 - self.lambda) * anchor_p,
            None => anchor_p,
        }
    }

    /// Versioned flat file of label counts.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{SCORER_MAGIC}\t{SCORER_VERSION}");
        let _ = writeln!(out, "lambda\t{}", self.lambda);
        let _ = writeln!(out, "prior\t{}\t{}", self.prior.positive, self.prior.total);
        for (a, c) in &self.anchor {
            let _ = writeln!(out, "A\t{a}\t{}\t{}", c.positive, c.total);
        }
        for ((a, n), c) in &self.pair {
            let _ = writeln!(out, "P\t{a}\t{n}\t{}\t{}", c.positive, c.total);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, DetectorError> {
        let err = |line: usize, msg: &str| DetectorError::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty scorer file"))?;
        if header != format!("{SCORER_MAGIC}\t{SCORER_VERSION}") {
            return Err(err(1, "unsupported scorer header"));
        }
        let mut scorer = ReferenceScorer {
            lambda: Self::DEFAULT_LAMBDA,
            prior: LabelCounts::default(),
            anchor: BTreeMap::new(),
            pair: BTreeMap::new(),
        };
        let counts = |line: usize, p: &str, t: &str| -> Result<LabelCounts, DetectorError> {
            let positive = p.parse().map_err(|_| err(line, "bad count"))?;
            let total = t.parse().map_err(|_| err(line, "bad count"))?;
            if positive > total {
                return Err(err(line, "positive count exceeds total"));
            }
            Ok(LabelCounts { positive, total })
        };
        for (line, l) in lines {
            if l.is_empty() {
                continue;
            }
            let f: Vec<&str> = l.split('\t').collect();
            match f.as_slice() {
                ["lambda", v] => scorer.lambda = v.parse().map_err(|_| err(line, "bad lambda"))?,
                ["prior", p, t] => scorer.prior = counts(line, p, t)?,
                ["A", a, p, t] => {
                    scorer.anchor.insert(a.to_string(), counts(line, p, t)?);
                }
                ["P", a, n, p, t] => {
                    scorer.pair.insert((a.to_string(), n.to_string()), counts(line, p, t)?);
                }
                _ => return Err(err(line, "unrecognised record")),
            }
        }
        if scorer.prior.total == 0 {
            return Err(DetectorError::EmptyCorpus);
        }
        Ok(scorer)
    }
}

impl BoundaryScorer for ReferenceScorer {
    fn score(&self, prefix: &[String], anchor_position: usize, context: &[String]) -> f64 {
        let next = context.first().map_or(NO_CONTEXT, String::as_str);
        self.probability(&prefix[anchor_position], next)
    }
}
