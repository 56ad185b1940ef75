//! End-to-end runs: config loading, per-utterance processing, reports and
//! corpus preparation.
//!
//! Errors fall into three classes with distinct exit codes: configuration
//! problems (1, including referenced files that are missing or do not parse),
//! data problems (2, malformed streams, bitexts and reference files) and
//! stage failures while processing an utterance (3).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{extract_pairs, make_context_corpus, make_partial_corpus, AlignmentSet};
use crate::beam::{parse_phrases, ConstrainedOracle};
use crate::bleu::{corpus_bleu, BleuScore};
use crate::detector::{
    is_comma, make_training_samples, strip_punctuation, BoundaryScorer, DetectorConfig, PunctuationScorer,
    ReferenceScorer, TrainingSample,
};
use crate::latency::{average_lagging, equilibrium_efficiency, inverse_ee, EeParams, SegmentLengths};
use crate::normalize::{normalize, NGramLm, NormalizationTrace, NormalizerConfig, Whitelist};
use crate::policy::{translate_utterance, Policy, ToyLexiconOracle, TranslationOracle};
use crate::stream::{group_utterances, parse_stream, reindex, StreamEvent, Token, Utterance};

pub const REPORT_FORMAT: &str = "simtrans-report/1";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("utterance {utt}: {stage} failed: {msg}")]
    Stage {
        utt: String,
        stage: &'static str,
        msg: String,
    },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Data(_) => 2,
            HarnessError::Stage { .. } => 3,
        }
    }
}

fn config_err(msg: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(msg.to_string())
}

fn data_err(msg: impl std::fmt::Display) -> HarnessError {
    HarnessError::Data(msg.to_string())
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub stream: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub fillers: Option<PathBuf>,
    pub whitelist: Option<PathBuf>,
    /// Count file written by `NGramLm::to_text`.
    pub lm: Option<PathBuf>,
    /// Tokenized text, one sentence per line; trained at load time.
    pub lm_corpus: Option<PathBuf>,
    pub scorer: Option<PathBuf>,
    pub references: Option<PathBuf>,
    pub must_include: Option<PathBuf>,
    pub forbid: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    pub delta1: f64,
    pub delta2: f64,
    pub max_dynamic_context: usize,
}

impl Default for DetectorSection {
    fn default() -> Self {
        DetectorSection {
            delta1: 0.7,
            delta2: 0.3,
            max_dynamic_context: 5,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySection {
    pub kind: String,
    pub k_wait: Option<usize>,
    pub k_discard: Option<usize>,
}

impl Default for PolicySection {
    fn default() -> Self {
        PolicySection {
            kind: "context_aware".into(),
            k_wait: None,
            k_discard: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    pub ee_r: f64,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection {
            ee_r: EeParams::DEFAULT_R,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormalizationSection {
    pub enabled: bool,
    pub xi: f64,
    pub lm_order: usize,
    pub lm_alpha: f64,
}

impl Default for NormalizationSection {
    fn default() -> Self {
        NormalizationSection {
            enabled: true,
            xi: NormalizerConfig::DEFAULT_XI,
            lm_order: NGramLm::DEFAULT_ORDER,
            lm_alpha: NGramLm::DEFAULT_ALPHA,
        }
    }
}

/// Parsed run configuration. Relative paths resolve against `base_dir`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub normalization: NormalizationSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Command-line values that replace config entries. Paths here are used as given.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub policy: Option<String>,
    pub k_wait: Option<usize>,
    pub k_discard: Option<usize>,
    pub ee_r: Option<f64>,
    pub must_include: Option<PathBuf>,
    pub forbid: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub no_normalize: bool,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, HarnessError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| config_err(format!("invalid config: {e}")))?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    /// Apply command-line overrides. Override paths are made absolute against
    /// the working directory so they do not resolve against the config file.
    pub fn apply(&mut self, o: &Overrides) {
        let cwd = |p: &PathBuf| std::env::current_dir().map(|d| d.join(p)).unwrap_or_else(|_| p.clone());
        if let Some(kind) = &o.policy {
            self.policy.kind = kind.clone();
        }
        if o.k_wait.is_some() {
            self.policy.k_wait = o.k_wait;
        }
        if o.k_discard.is_some() {
            self.policy.k_discard = o.k_discard;
        }
        if let Some(r) = o.ee_r {
            self.metrics.ee_r = r;
        }
        if let Some(p) = &o.must_include {
            self.paths.must_include = Some(cwd(p));
        }
        if let Some(p) = &o.forbid {
            self.paths.forbid = Some(cwd(p));
        }
        if let Some(p) = &o.report {
            self.paths.report = Some(cwd(p));
        }
        if o.no_normalize {
            self.normalization.enabled = false;
        }
    }

    pub fn report_path(&self) -> Option<PathBuf> {
        self.paths.report.as_ref().map(|p| self.resolve(p))
    }

    fn read(&self, p: &Path, what: &str) -> Result<String, HarnessError> {
        let full = self.resolve(p);
        std::fs::read_to_string(&full).map_err(|e| config_err(format!("cannot read {what} {}: {e}", full.display())))
    }

    fn read_opt(&self, p: &Option<PathBuf>, what: &str) -> Result<Option<String>, HarnessError> {
        p.as_ref().map(|p| self.read(p, what)).transpose()
    }
}

/// Normalization stage settings with an optional abnormal-content model.
pub struct Normalization {
    pub config: NormalizerConfig,
    pub lm: Option<NGramLm>,
}

/// Everything a run needs, loaded and validated.
pub struct RunInputs {
    pub events: Vec<StreamEvent>,
    pub detector: DetectorConfig,
    pub scorer: Box<dyn BoundaryScorer>,
    pub oracle: Box<dyn TranslationOracle>,
    pub policy: Policy,
    pub ee: EeParams,
    pub normalization: Option<Normalization>,
    pub references: Option<Vec<Vec<String>>>,
    pub constraint_counts: (usize, usize),
}

fn split_lines(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split_whitespace().map(String::from).collect())
        .collect()
}

pub fn load_inputs(cfg: &RunConfig) -> Result<RunInputs, HarnessError> {
    let stream_path = cfg
        .paths
        .stream
        .as_ref()
        .ok_or_else(|| config_err("paths.stream is required"))?;
    let lexicon_path = cfg
        .paths
        .lexicon
        .as_ref()
        .ok_or_else(|| config_err("paths.lexicon is required"))?;

    let d = &cfg.detector;
    let detector = DetectorConfig::new(d.delta1, d.delta2, d.max_dynamic_context).map_err(config_err)?;
    let policy = Policy::from_parts(&cfg.policy.kind, cfg.policy.k_wait, cfg.policy.k_discard).map_err(config_err)?;
    let ee = EeParams::new(cfg.metrics.ee_r).map_err(config_err)?;

    let lexicon = ToyLexiconOracle::parse(&cfg.read(lexicon_path, "lexicon")?)
        .map_err(|e| config_err(format!("lexicon: {e}")))?;
    let positive = cfg
        .read_opt(&cfg.paths.must_include, "must-include phrases")?
        .map(|t| parse_phrases(&t))
        .unwrap_or_default();
    let negative = cfg
        .read_opt(&cfg.paths.forbid, "forbidden phrases")?
        .map(|t| parse_phrases(&t))
        .unwrap_or_default();
    let constraint_counts = (positive.len(), negative.len());
    let oracle: Box<dyn TranslationOracle> = if positive.is_empty() && negative.is_empty() {
        Box::new(lexicon)
    } else {
        Box::new(ConstrainedOracle::new(lexicon, positive, negative))
    };

    let scorer: Box<dyn BoundaryScorer> = match cfg.read_opt(&cfg.paths.scorer, "scorer")? {
        Some(text) => Box::new(ReferenceScorer::from_text(&text).map_err(|e| config_err(format!("scorer: {e}")))?),
        None => Box::new(PunctuationScorer),
    };

    let normalization = if cfg.normalization.enabled {
        let n = &cfg.normalization;
        let fillers = match cfg.read_opt(&cfg.paths.fillers, "fillers")? {
            Some(t) => NormalizerConfig::parse_fillers(&t),
            None => NormalizerConfig::default().fillers,
        };
        let whitelist = cfg
            .read_opt(&cfg.paths.whitelist, "whitelist")?
            .map(|t| Whitelist::parse(&t))
            .unwrap_or_default();
        let config = NormalizerConfig::new(fillers, whitelist, n.xi).map_err(config_err)?;
        let lm = match (&cfg.paths.lm, &cfg.paths.lm_corpus) {
            (Some(_), Some(_)) => return Err(config_err("set at most one of paths.lm and paths.lm_corpus")),
            (Some(p), None) => Some(
                NGramLm::from_text(&cfg.read(p, "language model")?)
                    .map_err(|e| config_err(format!("language model: {e}")))?,
            ),
            (None, Some(p)) => {
                let corpus = split_lines(&cfg.read(p, "language model corpus")?);
                Some(NGramLm::train(&corpus, n.lm_order, n.lm_alpha).map_err(config_err)?)
            }
            (None, None) => None,
        };
        Some(Normalization { config, lm })
    } else {
        None
    };

    let stream_bytes = std::fs::read(cfg.resolve(stream_path)).map_err(|e| {
        config_err(format!(
            "cannot read stream {}: {e}",
            cfg.resolve(stream_path).display()
        ))
    })?;
    let events = parse_stream(&stream_bytes).map_err(|e| data_err(format!("stream: {e}")))?;

    let references = match cfg.read_opt(&cfg.paths.references, "references")? {
        Some(text) => {
            let refs = split_lines(&text);
            let utts = group_utterances(&events).len();
            if refs.len() != utts {
                return Err(data_err(format!(
                    "{} reference lines for {utts} utterances",
                    refs.len()
                )));
            }
            Some(refs)
        }
        None => None,
    };

    Ok(RunInputs {
        events,
        detector,
        scorer,
        oracle,
        policy,
        ee,
        normalization,
        references,
        constraint_counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitReport {
    pub sentence: usize,
    pub index: usize,
    pub sentence_final: bool,
    pub decided_at_ms: u64,
    pub tokens: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentReport {
    pub lx: usize,
    pub ly: usize,
    pub retracted: usize,
    pub read_end_ms: u64,
    pub write_end_ms: u64,
    pub emitted: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtteranceReport {
    pub id: String,
    pub source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization: Option<NormalizationTrace>,
    pub units: Vec<UnitReport>,
    pub segments: Vec<SegmentReport>,
    pub committed: String,
    pub retracted_total: usize,
    pub ee: Option<f64>,
    pub inverse_ee: Option<f64>,
    pub average_lagging: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSettings {
    pub policy: Policy,
    pub delta1: f64,
    pub delta2: f64,
    pub max_dynamic_context: usize,
    pub ee_r: f64,
    pub ee_r_note: String,
    pub normalization: bool,
    pub must_include_phrases: usize,
    pub forbidden_phrases: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub format: String,
    pub settings: RunSettings,
    pub utterances: Vec<UtteranceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bleu: Option<BleuScore>,
}

impl Report {
    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn committed(&self) -> Vec<Vec<String>> {
        self.utterances
            .iter()
            .map(|u| u.committed.split_whitespace().map(String::from).collect())
            .collect()
    }
}

fn stage(utt: &str, stage: &'static str, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Stage {
        utt: utt.to_string(),
        stage,
        msg: e.to_string(),
    }
}

/// Normalization, detection, translation and metrics for one utterance.
pub fn process_utterance(utt: &Utterance, inputs: &RunInputs) -> Result<UtteranceReport, HarnessError> {
    let (mut tokens, trace): (Vec<Token>, Option<NormalizationTrace>) = match &inputs.normalization {
        Some(n) => {
            let (kept, trace) =
                normalize(&utt.surfaces(), &n.config, n.lm.as_ref()).map_err(|e| stage(&utt.id, "normalization", e))?;
            (kept.into_iter().map(|i| utt.tokens[i].clone()).collect(), Some(trace))
        }
        None => (utt.tokens.clone(), None),
    };
    reindex(&mut tokens);
    let translation = translate_utterance(&tokens, &inputs.detector, &inputs.scorer, &inputs.oracle, inputs.policy)
        .map_err(|e| stage(&utt.id, "translation", e))?;

    let mut notes = Vec::new();
    let lengths: Vec<SegmentLengths> = translation
        .timeline
        .lengths()
        .into_iter()
        .map(SegmentLengths::from)
        .collect();
    let ee = equilibrium_efficiency(&lengths, inputs.ee)
        .map_err(|e| notes.push(format!("efficiency: {e}")))
        .ok();
    let inv = inverse_ee(&lengths, inputs.ee).ok();
    let al = average_lagging(
        &translation.timeline.read_counts(),
        translation.timeline.source_consumed(),
    )
    .map_err(|e| notes.push(format!("average lagging: {e}")))
    .ok();

    let units = translation
        .ius
        .iter()
        .map(|iu| UnitReport {
            sentence: iu.sentence_id,
            index: iu.iu_index_in_sentence,
            sentence_final: iu.is_sentence_final,
            decided_at_ms: iu.decided_at_ms,
            tokens: iu.surfaces().join(" "),
        })
        .collect();
    let segments = translation
        .timeline
        .segments
        .iter()
        .map(|s| SegmentReport {
            lx: s.source_len,
            ly: s.target_len,
            retracted: s.retracted,
            read_end_ms: s.read_end_ms,
            write_end_ms: s.write_end_ms,
            emitted: s.emitted.join(" "),
        })
        .collect();
    Ok(UtteranceReport {
        id: utt.id.clone(),
        source: tokens.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" "),
        normalization: trace,
        units,
        segments,
        committed: translation.committed().join(" "),
        retracted_total: translation.timeline.retracted_counts().iter().sum(),
        ee,
        inverse_ee: inv,
        average_lagging: al,
        notes,
    })
}

/// Process every utterance, in parallel, keeping stream order in the report.
pub fn run(inputs: &RunInputs) -> Result<Report, HarnessError> {
    let utterances = group_utterances(&inputs.events);
    let results: Vec<Result<UtteranceReport, HarnessError>> =
        utterances.par_iter().map(|u| process_utterance(u, inputs)).collect();
    let utterances = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut report = Report {
        format: REPORT_FORMAT.to_string(),
        settings: RunSettings {
            policy: inputs.policy,
            delta1: inputs.detector.delta1(),
            delta2: inputs.detector.delta2(),
            max_dynamic_context: inputs.detector.max_dynamic_context,
            ee_r: inputs.ee.r(),
            ee_r_note: "r = 0.3 is the Chinese-to-English setting; other directions are uncalibrated".into(),
            normalization: inputs.normalization.is_some(),
            must_include_phrases: inputs.constraint_counts.0,
            forbidden_phrases: inputs.constraint_counts.1,
        },
        utterances,
        bleu: None,
    };
    if let Some(refs) = &inputs.references {
        report.bleu = Some(corpus_bleu(&report.committed(), refs).map_err(data_err)?);
    }
    Ok(report)
}

pub fn run_config(cfg: &RunConfig) -> Result<Report, HarnessError> {
    run(&load_inputs(cfg)?)
}

fn fmt_opt(v: Option<f64>, width: usize) -> String {
    match v {
        Some(x) => format!("{x:>width$.3}"),
        None => format!("{:>width$}", "-"),
    }
}

/// Fixed-width table: one row per utterance plus totals.
pub fn summary_table(report: &Report) -> String {
    let id_w = report
        .utterances
        .iter()
        .map(|u| u.id.chars().count())
        .max()
        .unwrap_or(2)
        .max(9);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "policy: {}  ee_r: {}",
        report.settings.policy.name(),
        report.settings.ee_r
    );
    let _ = writeln!(
        out,
        "{:<id_w$}  {:>5}  {:>5}  {:>9}  {:>7}  {:>7}  {:>7}",
        "utterance", "units", "segs", "retracted", "EE", "1/EE", "AL"
    );
    for u in &report.utterances {
        let _ = writeln!(
            out,
            "{:<id_w$}  {:>5}  {:>5}  {:>9}  {}  {}  {}",
            u.id,
            u.units.len(),
            u.segments.len(),
            u.retracted_total,
            fmt_opt(u.ee, 7),
            fmt_opt(u.inverse_ee, 7),
            fmt_opt(u.average_lagging, 7),
        );
    }
    let lags: Vec<f64> = report.utterances.iter().filter_map(|u| u.inverse_ee).collect();
    if !lags.is_empty() {
        let mean = lags.iter().sum::<f64>() / lags.len() as f64;
        let _ = writeln!(out, "mean 1/EE: {mean:.3} (words of lag)");
    }
    if let Some(b) = &report.bleu {
        let _ = writeln!(out, "BLEU: {:.2}", b.score);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrepareMode {
    Partial,
    Context,
    DetectorSamples,
}

impl std::str::FromStr for PrepareMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "partial" => Ok(PrepareMode::Partial),
            "context" => Ok(PrepareMode::Context),
            "detector-samples" => Ok(PrepareMode::DetectorSamples),
            _ => Err(format!(
                "unknown mode {s:?}; expected partial, context or detector-samples"
            )),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PrepareStats {
    pub lines: usize,
    pub records: usize,
    pub sub_sentence_splits: usize,
    pub segment_splits: usize,
    pub positive_samples: usize,
    pub negative_samples: usize,
}

/// Build training records from a bitext and alignments, or detector samples
/// from punctuated source text (target and alignments unused).
pub fn prepare_corpus(
    mode: PrepareMode,
    source: &str,
    target: Option<&str>,
    alignments: Option<&str>,
) -> Result<(Vec<String>, PrepareStats), HarnessError> {
    let src = split_lines(source);
    let mut stats = PrepareStats {
        lines: src.len(),
        ..Default::default()
    };
    let mut out = Vec::new();
    if mode == PrepareMode::DetectorSamples {
        for (n, line) in src.iter().enumerate() {
            let (bare, cuts) = strip_punctuation(line);
            let samples = make_training_samples(&bare, &cuts).map_err(|e| data_err(format!("line {}: {e}", n + 1)))?;
            for s in samples {
                match s.label {
                    crate::detector::SampleLabel::Positive => stats.positive_samples += 1,
                    crate::detector::SampleLabel::Negative => stats.negative_samples += 1,
                }
                out.push(s.to_line());
            }
        }
        stats.records = out.len();
        return Ok((out, stats));
    }
    let tgt = split_lines(target.ok_or_else(|| config_err("target text is required for this mode"))?);
    let aligns: Vec<&str> = alignments
        .ok_or_else(|| config_err("alignments are required for this mode"))?
        .lines()
        .collect();
    if tgt.len() != src.len() || aligns.len() != src.len() {
        return Err(data_err(format!(
            "line counts differ: {} source, {} target, {} alignment",
            src.len(),
            tgt.len(),
            aligns.len()
        )));
    }
    for (n, ((s, t), a)) in src.iter().zip(&tgt).zip(&aligns).enumerate() {
        let line_err = |e: crate::alignment::AlignmentError| data_err(format!("line {}: {e}", n + 1));
        let links = AlignmentSet::from_pharaoh(a).map_err(line_err)?;
        for pair in extract_pairs(s, t, &links, is_comma).map_err(line_err)? {
            match pair.split_kind {
                crate::alignment::SplitKind::SubSentence => stats.sub_sentence_splits += 1,
                crate::alignment::SplitKind::Segment => stats.segment_splits += 1,
            }
            match mode {
                PrepareMode::Partial => out.push(
                    make_partial_corpus(s, t, &links, pair.split)
                        .map_err(line_err)?
                        .to_line(),
                ),
                PrepareMode::Context if pair.split.1 < t.len() => out.push(
                    make_context_corpus(s, t, &links, pair.split)
                        .map_err(line_err)?
                        .to_line(),
                ),
                _ => {}
            }
        }
    }
    stats.records = out.len();
    Ok((out, stats))
}

/// Train the boundary scorer from a detector-sample file.
pub fn train_scorer(samples: &str) -> Result<ReferenceScorer, HarnessError> {
    let parsed = samples
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| TrainingSample::from_line(l, i + 1))
        .collect::<Result<Vec<_>, _>>()
        .map_err(data_err)?;
    ReferenceScorer::train(&parsed).map_err(data_err)
}

pub fn train_lm(corpus: &str, order: usize, alpha: f64) -> Result<NGramLm, HarnessError> {
    NGramLm::train(&split_lines(corpus), order, alpha).map_err(config_err)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EeRow {
    pub utt: String,
    pub segments: usize,
    pub ee: f64,
    pub inverse_ee: f64,
}

/// Efficiency per utterance over a `utt TAB LX TAB LY` timeline file.
/// Rows of one utterance must be contiguous.
pub fn ee_over_timeline(text: &str, params: EeParams) -> Result<Vec<EeRow>, HarnessError> {
    let mut groups: Vec<(String, Vec<SegmentLengths>)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| data_err(format!("line {}: bad length {s:?}", n + 1)))
        };
        if f.len() != 3 {
            return Err(data_err(format!("line {}: expected utt, LX, LY", n + 1)));
        }
        let seg = SegmentLengths {
            lx: parse(f[1])?,
            ly: parse(f[2])?,
        };
        match groups.last_mut() {
            Some((id, segs)) if id == f[0] => segs.push(seg),
            _ => {
                if groups.iter().any(|(id, _)| id == f[0]) {
                    return Err(data_err(format!(
                        "line {}: utterance {} is not contiguous",
                        n + 1,
                        f[0]
                    )));
                }
                groups.push((f[0].to_string(), vec![seg]));
            }
        }
    }
    groups
        .into_iter()
        .map(|(utt, segs)| {
            let inv = inverse_ee(&segs, params).map_err(|e| data_err(format!("utterance {utt}: {e}")))?;
            Ok(EeRow {
                utt,
                segments: segs.len(),
                ee: 1.0 / inv,
                inverse_ee: inv,
            })
        })
        .collect()
}
