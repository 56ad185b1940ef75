//! Translation of a detected unit stream under one of four policies.
//!
//! * `Full` waits for a sentence to end and translates it once.
//! * `SubSentence` translates every unit on its own and concatenates.
//! * `WaitK` reads `k` tokens ahead and then alternates one read with one
//!   write until the source sentence is exhausted.
//! * `ContextAware` translates a sentence-initial unit without any prefix and
//!   continues later units from the sentence so far, forcing the previous
//!   translation minus its last `k_discard` tokens as target prefix.
//!
//! Forced prefixes never cross a sentence boundary, so a finished sentence is
//! never retracted.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{BoundaryScorer, Detector, DetectorConfig, DetectorState};
use crate::stream::{group_utterances, InformationUnit, Segment, StreamEvent, Token, TranslationTimeline};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct OracleError(pub String);

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("segment {segment}: oracle failed: {source}")]
    Oracle { segment: usize, source: OracleError },
    #[error("segment {segment}: oracle output does not extend the forced prefix")]
    PrefixViolation { segment: usize },
    #[error("policy {kind:?} requires `{param}` >= {min}")]
    MissingParameter {
        kind: String,
        param: &'static str,
        min: usize,
    },
    #[error("unknown policy kind {0:?}")]
    UnknownKind(String),
}

/// Pluggable translation backend.
pub trait TranslationOracle: Send + Sync {
    /// Translate `source`; the output must begin with `forced_prefix`.
    fn generate(&self, source: &[String], forced_prefix: &[String]) -> Result<Vec<String>, OracleError>;
}

impl<O: TranslationOracle + ?Sized> TranslationOracle for &O {
    fn generate(&self, source: &[String], forced_prefix: &[String]) -> Result<Vec<String>, OracleError> {
        (**self).generate(source, forced_prefix)
    }
}

impl<O: TranslationOracle + ?Sized> TranslationOracle for Box<O> {
    fn generate(&self, source: &[String], forced_prefix: &[String]) -> Result<Vec<String>, OracleError> {
        (**self).generate(source, forced_prefix)
    }
}

/// Word-for-word lexicon backend.
///
/// The forced prefix is taken to cover the first `prefix.len()` source tokens;
/// each remaining source token maps to exactly one target token. An entry
/// keyed `token next` applies only when `next` follows `token` in the source
/// and wins over the plain `token` entry. Unknown tokens pass through.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ToyLexiconOracle {
    words: HashMap<String, String>,
    contextual: HashMap<(String, String), String>,
}

impl ToyLexiconOracle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, source: &str, target: &str) {
        match source.split_once(' ') {
            Some((tok, next)) => {
                self.contextual
                    .insert((tok.to_string(), next.trim().to_string()), target.to_string());
            }
            None => {
                self.words.insert(source.to_string(), target.to_string());
            }
        }
    }

    /// Two tab-separated columns per line: source key and target token.
    pub fn parse(text: &str) -> Result<Self, OracleError> {
        let mut lex = Self::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let (src, tgt) = line
                .split_once('\t')
                .ok_or_else(|| OracleError(format!("lexicon line {}: expected two tab-separated columns", i + 1)))?;
            let tgt = tgt.trim();
            if src.trim().is_empty() || tgt.is_empty() || tgt.contains(char::is_whitespace) {
                return Err(OracleError(format!(
                    "lexicon line {}: target must be a single token",
                    i + 1
                )));
            }
            lex.insert(src.trim(), tgt);
        }
        Ok(lex)
    }

    fn translate_at(&self, source: &[String], i: usize) -> String {
        if let Some(next) = source.get(i + 1) {
            if let Some(t) = self.contextual.get(&(source[i].clone(), next.clone())) {
                return t.clone();
            }
        }
        self.words.get(&source[i]).cloned().unwrap_or_else(|| source[i].clone())
    }
}

impl TranslationOracle for ToyLexiconOracle {
    fn generate(&self, source: &[String], forced_prefix: &[String]) -> Result<Vec<String>, OracleError> {
        let mut out = forced_prefix.to_vec();
        out.extend((forced_prefix.len()..source.len()).map(|i| self.translate_at(source, i)));
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    Full,
    SubSentence,
    WaitK { k_wait: usize },
    ContextAware { k_discard: usize },
}

impl Policy {
    pub const DEFAULT_K_DISCARD: usize = 1;

    /// Build from the `policy.kind`, `policy.k_wait`, `policy.k_discard` keys.
    pub fn from_parts(kind: &str, k_wait: Option<usize>, k_discard: Option<usize>) -> Result<Self, PolicyError> {
        match kind {
            "full" => Ok(Policy::Full),
            "subsentence" | "sub_sentence" => Ok(Policy::SubSentence),
            "wait_k" => match k_wait {
                Some(k) if k >= 1 => Ok(Policy::WaitK { k_wait: k }),
                _ => Err(PolicyError::MissingParameter {
                    kind: kind.to_string(),
                    param: "k_wait",
                    min: 1,
                }),
            },
            "context_aware" => Ok(Policy::ContextAware {
                k_discard: k_discard.unwrap_or(Self::DEFAULT_K_DISCARD),
            }),
            other => Err(PolicyError::UnknownKind(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Policy::Full => "full",
            Policy::SubSentence => "subsentence",
            Policy::WaitK { .. } => "wait_k",
            Policy::ContextAware { .. } => "context_aware",
        }
    }

    /// Tokens that may be withdrawn from a still-open sentence.
    pub fn retraction_bound(&self) -> usize {
        match self {
            Policy::ContextAware { k_discard } => *k_discard,
            _ => 0,
        }
    }
}

/// Continue a translation after discarding the last `k_discard` tokens of
/// the previous one. Returns the new full translation and the forced prefix length.
pub fn context_aware_continue<O: TranslationOracle + ?Sized>(
    source_context: &[String],
    prev_translation: &[String],
    k_discard: usize,
    oracle: &O,
) -> Result<(Vec<String>, usize), PolicyError> {
    let keep = prev_translation.len().saturating_sub(k_discard);
    let forced = &prev_translation[..keep];
    let out = oracle
        .generate(source_context, forced)
        .map_err(|source| PolicyError::Oracle { segment: 0, source })?;
    if !out.starts_with(forced) {
        return Err(PolicyError::PrefixViolation { segment: 0 });
    }
    Ok((out, keep))
}

fn with_segment(err: PolicyError, segment: usize) -> PolicyError {
    match err {
        PolicyError::Oracle { source, .. } => PolicyError::Oracle { segment, source },
        PolicyError::PrefixViolation { .. } => PolicyError::PrefixViolation { segment },
        other => other,
    }
}

/// Units, sentences and timeline of one translated utterance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtteranceTranslation {
    pub ius: Vec<InformationUnit>,
    pub timeline: TranslationTimeline,
    /// Index of the last segment of every sentence.
    pub sentence_ends: Vec<usize>,
}

impl UtteranceTranslation {
    pub fn committed(&self) -> &[String] {
        &self.timeline.committed_target
    }
}

/// Detect units over the utterance tokens, flushing at the end.
pub fn detect_units<S: BoundaryScorer + ?Sized>(
    tokens: &[Token],
    config: &DetectorConfig,
    scorer: &S,
) -> Vec<InformationUnit> {
    let detector = Detector::new(config, scorer);
    let mut state = DetectorState::new();
    let mut ius = detector.step_many(&mut state, tokens.iter().cloned());
    ius.extend(detector.flush(&mut state));
    ius
}

/// Group consecutive units into sentences.
pub fn sentences(ius: &[InformationUnit]) -> Vec<&[InformationUnit]> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, iu) in ius.iter().enumerate() {
        if iu.is_sentence_final {
            out.push(&ius[start..=i]);
            start = i + 1;
        }
    }
    if start < ius.len() {
        out.push(&ius[start..]);
    }
    out
}

struct TimelineBuilder {
    timeline: TranslationTimeline,
    sentence_start: usize,
    sentence_ends: Vec<usize>,
}

impl TimelineBuilder {
    fn new() -> Self {
        TimelineBuilder {
            timeline: TranslationTimeline::default(),
            sentence_start: 0,
            sentence_ends: Vec::new(),
        }
    }

    fn segment_index(&self) -> usize {
        self.timeline.segments.len()
    }

    /// Current sentence's committed translation.
    fn open_sentence(&self) -> &[String] {
        &self.timeline.committed_target[self.sentence_start..]
    }

    fn push(
        &mut self,
        source_len: usize,
        keep_in_sentence: usize,
        emitted: Vec<String>,
        read_end_ms: u64,
        write_end_ms: u64,
    ) {
        let committed = &mut self.timeline.committed_target;
        let retracted = committed.len() - self.sentence_start - keep_in_sentence;
        committed.truncate(self.sentence_start + keep_in_sentence);
        committed.extend(emitted.iter().cloned());
        self.timeline.segments.push(Segment {
            source_len,
            target_len: emitted.len(),
            retracted,
            read_end_ms,
            write_end_ms,
            emitted,
        });
    }

    fn end_sentence(&mut self) {
        if !self.timeline.segments.is_empty() {
            self.sentence_ends.push(self.timeline.segments.len() - 1);
        }
        self.sentence_start = self.timeline.committed_target.len();
    }
}

fn call<O: TranslationOracle + ?Sized>(
    oracle: &O,
    source: &[String],
    prefix: &[String],
    segment: usize,
) -> Result<Vec<String>, PolicyError> {
    let out = oracle
        .generate(source, prefix)
        .map_err(|source| PolicyError::Oracle { segment, source })?;
    if !out.starts_with(prefix) {
        return Err(PolicyError::PrefixViolation { segment });
    }
    Ok(out)
}

fn last_ts(tokens: &[Token]) -> u64 {
    tokens.last().map_or(0, |t| t.ts_ms)
}

/// Translate the units of one utterance under `policy`.
pub fn translate_units<O: TranslationOracle + ?Sized>(
    ius: Vec<InformationUnit>,
    oracle: &O,
    policy: Policy,
) -> Result<UtteranceTranslation, PolicyError> {
    let mut b = TimelineBuilder::new();
    for sentence in sentences(&ius) {
        let src_tokens: Vec<Token> = sentence.iter().flat_map(|iu| iu.tokens.iter().cloned()).collect();
        let src: Vec<String> = src_tokens.iter().map(|t| t.surface.clone()).collect();
        let decided = sentence.last().map_or(0, |iu| iu.decided_at_ms);
        match policy {
            Policy::Full => {
                let out = call(oracle, &src, &[], b.segment_index())?;
                b.push(src.len(), 0, out, last_ts(&src_tokens), decided);
            }
            Policy::SubSentence => {
                for iu in sentence {
                    let out = call(oracle, &iu.surfaces(), &[], b.segment_index())?;
                    let keep = b.open_sentence().len();
                    b.push(iu.len(), keep, out, last_ts(&iu.tokens), iu.decided_at_ms);
                }
            }
            Policy::ContextAware { k_discard } => {
                let mut read = 0;
                for iu in sentence {
                    read += iu.len();
                    let seg = b.segment_index();
                    let (out, keep) = if iu.is_sentence_initial() || b.open_sentence().is_empty() {
                        (call(oracle, &iu.surfaces(), &[], seg)?, 0)
                    } else {
                        context_aware_continue(&src[..read], b.open_sentence(), k_discard, oracle)
                            .map_err(|e| with_segment(e, seg))?
                    };
                    let emitted = out[keep..].to_vec();
                    b.push(iu.len(), keep, emitted, last_ts(&iu.tokens), iu.decided_at_ms);
                }
            }
            Policy::WaitK { k_wait } => wait_k_sentence(&mut b, &src_tokens, &src, k_wait, oracle)?,
        }
        b.end_sentence();
    }
    Ok(UtteranceTranslation {
        ius,
        timeline: b.timeline,
        sentence_ends: b.sentence_ends,
    })
}

fn wait_k_sentence<O: TranslationOracle + ?Sized>(
    b: &mut TimelineBuilder,
    tokens: &[Token],
    src: &[String],
    k: usize,
    oracle: &O,
) -> Result<(), PolicyError> {
    let n = src.len();
    let mut read = 0;
    let mut read_since_write = 0;
    loop {
        let written = b.open_sentence().len();
        let want = (written + k).min(n);
        if read < want {
            read_since_write += want - read;
            read = want;
        }
        let out = call(oracle, &src[..read], b.open_sentence(), b.segment_index())?;
        let ts = tokens[read - 1].ts_ms;
        if read == n {
            let rest = out[written..].to_vec();
            if !rest.is_empty() || read_since_write > 0 {
                b.push(read_since_write, written, rest, ts, ts);
            }
            return Ok(());
        }
        match out.get(written) {
            Some(next) => {
                b.push(read_since_write, written, vec![next.clone()], ts, ts);
                read_since_write = 0;
            }
            // the backend has nothing to add yet: read one more token
            None => {
                read += 1;
                read_since_write += 1;
            }
        }
    }
}

/// Detect and translate one utterance.
pub fn translate_utterance<S, O>(
    tokens: &[Token],
    detector: &DetectorConfig,
    scorer: &S,
    oracle: &O,
    policy: Policy,
) -> Result<UtteranceTranslation, PolicyError>
where
    S: BoundaryScorer + ?Sized,
    O: TranslationOracle + ?Sized,
{
    translate_units(detect_units(tokens, detector, scorer), oracle, policy)
}

/// Translate every utterance of a stream, in stream order.
pub fn translate_stream<S, O>(
    events: &[StreamEvent],
    detector: &DetectorConfig,
    scorer: &S,
    oracle: &O,
    policy: Policy,
) -> Result<Vec<(String, UtteranceTranslation)>, (String, PolicyError)>
where
    S: BoundaryScorer + ?Sized,
    O: TranslationOracle + ?Sized,
{
    group_utterances(events)
        .into_iter()
        .map(|u| {
            translate_utterance(&u.tokens, detector, scorer, oracle, policy)
                .map(|t| (u.id.clone(), t))
                .map_err(|e| (u.id.clone(), e))
        })
        .collect()
}

/// Displayed target after every segment, allowing retraction.
pub fn committed_prefix_trace(timeline: &TranslationTimeline) -> Vec<Vec<String>> {
    let mut shown: Vec<String> = Vec::new();
    let mut out = Vec::with_capacity(timeline.segments.len());
    for s in &timeline.segments {
        shown.truncate(shown.len() - s.retracted);
        shown.extend(s.emitted.iter().cloned());
        out.push(shown.clone());
    }
    out
}

/// Displayed target for consumers that cannot take retractions back.
///
/// Withholds the last `k_discard` tokens of any sentence that is still open,
/// so every snapshot extends the previous one.
pub fn stable_prefix_trace(translation: &UtteranceTranslation, k_discard: usize) -> Vec<Vec<String>> {
    let revisable = committed_prefix_trace(&translation.timeline);
    let mut sentence_start = 0;
    let mut out = Vec::with_capacity(revisable.len());
    for (i, snap) in revisable.into_iter().enumerate() {
        if translation.sentence_ends.contains(&i) {
            sentence_start = snap.len();
            out.push(snap);
        } else {
            let open = snap.len() - sentence_start;
            let show = snap.len() - open.min(k_discard);
            out.push(snap[..show].to_vec());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::PunctuationScorer;

    fn w(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn toks(s: &str) -> Vec<Token> {
        s.split_whitespace()
            .enumerate()
            .map(|(i, x)| Token::new(x, i as u64 * 100, i))
            .collect()
    }

    fn lexicon() -> ToyLexiconOracle {
        ToyLexiconOracle::parse("a\tA\nb\tB\nc\tC\nd\tD\nb c\tB2\n，\t,\n。\t.\n").unwrap()
    }

    #[test]
    fn lexicon_oracle() {
        let lex = lexicon();
        assert_eq!(lex.generate(&w("a b"), &[]).unwrap(), w("A B"));
        assert_eq!(lex.generate(&w("a b c"), &[]).unwrap(), w("A B2 C"));
        assert_eq!(lex.generate(&w("a b c"), &w("X")).unwrap(), w("X B2 C"));
        assert_eq!(lex.generate(&w("zz"), &[]).unwrap(), w("zz"));
        assert!(ToyLexiconOracle::parse("a A\n").is_err());
    }

    #[test]
    fn continue_truncates_prefix() {
        let lex = lexicon();
        let prev = w("t1 t2 t3 t4 t5");
        let (out, keep) = context_aware_continue(&w("a b c d e f"), &prev, 2, &lex).unwrap();
        assert_eq!(keep, 3);
        assert!(out.starts_with(&w("t1 t2 t3")));
        let (plain, keep) = context_aware_continue(&w("a b"), &[], 0, &lex).unwrap();
        assert_eq!((plain, keep), (w("A B"), 0));
        // discard larger than the previous translation clears it
        let (_, keep) = context_aware_continue(&w("a b"), &w("A"), 3, &lex).unwrap();
        assert_eq!(keep, 0);
    }

    #[test]
    fn verbatim_prefix_with_no_discard() {
        // a backend that would rather restart the sentence is still forced to continue it
        struct Restarting;
        impl TranslationOracle for Restarting {
            fn generate(&self, source: &[String], prefix: &[String]) -> Result<Vec<String>, OracleError> {
                let mut out = prefix.to_vec();
                out.extend(w("It 's also a very surprising , tangled place ."));
                let _ = source;
                Ok(out)
            }
        }
        let prev = w("It also surprised me very much before .");
        let (out, keep) = context_aware_continue(&w("这点 也是 以前"), &prev, 0, &Restarting).unwrap();
        assert_eq!(keep, prev.len());
        assert_eq!(&out[..prev.len()], prev.as_slice());
    }

    #[test]
    fn prefix_violation_is_reported() {
        struct Ignoring;
        impl TranslationOracle for Ignoring {
            fn generate(&self, source: &[String], _: &[String]) -> Result<Vec<String>, OracleError> {
                Ok(source.iter().rev().cloned().collect())
            }
        }
        assert_eq!(
            context_aware_continue(&w("a"), &w("A B C"), 1, &Ignoring),
            Err(PolicyError::PrefixViolation { segment: 0 })
        );
        let ius = detect_units(&toks("a ， b"), &DetectorConfig::default(), &PunctuationScorer);
        let err = translate_units(ius, &Ignoring, Policy::ContextAware { k_discard: 1 }).unwrap_err();
        assert_eq!(err, PolicyError::PrefixViolation { segment: 1 });
    }

    #[test]
    fn oracle_failure_carries_segment() {
        struct Failing;
        impl TranslationOracle for Failing {
            fn generate(&self, source: &[String], _: &[String]) -> Result<Vec<String>, OracleError> {
                if source.iter().any(|t| t == "boom") {
                    Err(OracleError("backend down".into()))
                } else {
                    Ok(source.to_vec())
                }
            }
        }
        let ius = detect_units(&toks("a ， boom 。"), &DetectorConfig::default(), &PunctuationScorer);
        let err = translate_units(ius, &Failing, Policy::SubSentence).unwrap_err();
        assert!(matches!(err, PolicyError::Oracle { segment: 1, .. }));
    }

    #[test]
    fn full_policy_single_burst() {
        let ius = detect_units(&toks("a b c d 。"), &DetectorConfig::default(), &PunctuationScorer);
        let t = translate_units(ius, &lexicon(), Policy::Full).unwrap();
        assert_eq!(t.timeline.lengths(), vec![(5, 5)]);
        assert_eq!(committed_prefix_trace(&t.timeline).len(), 1);
    }

    #[test]
    fn context_aware_two_units() {
        // first unit "a b ，" alone gives "A B ,"; with the rest visible "b" would stay "B"
        let ius = detect_units(&toks("a b ， c d 。"), &DetectorConfig::default(), &PunctuationScorer);
        assert_eq!(ius.len(), 2);
        let t = translate_units(ius, &lexicon(), Policy::ContextAware { k_discard: 1 }).unwrap();
        assert_eq!(t.committed(), w("A B , C D .").as_slice());
        assert_eq!(t.timeline.retracted_counts(), vec![0, 1]);
        assert_eq!(t.timeline.lengths(), vec![(3, 3), (3, 4)]);
        let trace = committed_prefix_trace(&t.timeline);
        assert_eq!(trace, vec![w("A B ,"), w("A B , C D .")]);
        let stable = stable_prefix_trace(&t, 1);
        assert_eq!(stable, vec![w("A B"), w("A B , C D .")]);
    }

    #[test]
    fn discard_lets_context_repair_the_tail() {
        // "b" translated alone is "B"; once "c" follows it becomes "B2"
        let ius = detect_units(&toks("a b c 。"), &DetectorConfig::default(), &SplitAfterB);
        assert_eq!(ius[0].surfaces(), w("a b"));
        let keep_all = translate_units(ius.clone(), &lexicon(), Policy::ContextAware { k_discard: 0 }).unwrap();
        assert_eq!(keep_all.committed(), w("A B C .").as_slice());
        let discard = translate_units(ius, &lexicon(), Policy::ContextAware { k_discard: 1 }).unwrap();
        assert_eq!(discard.committed(), w("A B2 C .").as_slice());
        assert_eq!(discard.timeline.retracted_counts(), vec![0, 1]);
    }

    struct SplitAfterB;
    impl BoundaryScorer for SplitAfterB {
        fn score(&self, prefix: &[String], anchor: usize, _: &[String]) -> f64 {
            if prefix[anchor] == "b" || prefix[anchor] == "。" {
                1.0
            } else {
                0.0
            }
        }
    }

    #[test]
    fn wait_k_schedule_and_segments() {
        let ius = detect_units(&toks("a b c d e f"), &DetectorConfig::default(), &PunctuationScorer);
        let t = translate_units(ius, &lexicon(), Policy::WaitK { k_wait: 3 }).unwrap();
        assert_eq!(t.timeline.lengths(), vec![(3, 1), (1, 1), (1, 1), (1, 3)]);
        assert_eq!(t.timeline.read_counts(), vec![3, 4, 5, 6, 6, 6]);
        assert_eq!(t.committed(), w("A B2 C D e f").as_slice());
    }

    #[test]
    fn sentences_never_retracted() {
        let ius = detect_units(
            &toks("a ， b 。 c ， d 。"),
            &DetectorConfig::default(),
            &PunctuationScorer,
        );
        let t = translate_units(ius, &lexicon(), Policy::ContextAware { k_discard: 6 }).unwrap();
        // sentence-initial unit of the second sentence starts fresh
        assert_eq!(t.timeline.retracted_counts(), vec![0, 2, 0, 2]);
        assert_eq!(t.sentence_ends, vec![1, 3]);
        assert_eq!(t.committed(), w("A , B . C , D .").as_slice());
    }

    #[test]
    fn policy_parsing() {
        assert_eq!(Policy::from_parts("full", None, None), Ok(Policy::Full));
        assert_eq!(
            Policy::from_parts("wait_k", Some(3), None),
            Ok(Policy::WaitK { k_wait: 3 })
        );
        assert!(Policy::from_parts("wait_k", Some(0), None).is_err());
        assert!(Policy::from_parts("wait_k", None, None).is_err());
        assert_eq!(
            Policy::from_parts("context_aware", None, None),
            Ok(Policy::ContextAware { k_discard: 1 })
        );
        assert!(Policy::from_parts("greedy", None, None).is_err());
    }
}
