//! Transcript clean-up ahead of boundary detection: filler removal,
//! repetition collapsing and language-model based dropping of implausible
//! tokens. Every step only deletes tokens.

mod lm;
mod repetition;
pub mod suffix;

use std::collections::HashSet;

use serde::Serialize;
use thiserror::Error;

pub use lm::{LmError, NGramLm};
pub use repetition::{remove_repetitions, Whitelist};

#[derive(Debug, Error, PartialEq)]
pub enum NormalizeError {
    #[error("abnormality threshold must lie in [0, 1), got {0}")]
    BadThreshold(f64),
    #[error(transparent)]
    Lm(#[from] LmError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizerConfig {
    pub fillers: HashSet<String>,
    pub whitelist: Whitelist,
    xi: f64,
}

impl NormalizerConfig {
    pub const DEFAULT_XI: f64 = 1e-4;

    pub fn new(fillers: HashSet<String>, whitelist: Whitelist, xi: f64) -> Result<Self, NormalizeError> {
        if !(0.0..1.0).contains(&xi) {
            return Err(NormalizeError::BadThreshold(xi));
        }
        Ok(NormalizerConfig { fillers, whitelist, xi })
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// One filler per line.
    pub fn parse_fillers(text: &str) -> HashSet<String> {
        text.lines().flat_map(str::split_whitespace).map(String::from).collect()
    }
}

impl Default for NormalizerConfig {
    fn default() -> Self {
        let fillers = ["嗯", "呃", "啊"].iter().map(|s| s.to_string()).collect();
        NormalizerConfig {
            fillers,
            whitelist: Whitelist::default(),
            xi: Self::DEFAULT_XI,
        }
    }
}

pub fn remove_fillers(tokens: &[String], fillers: &HashSet<String>) -> Vec<String> {
    tokens.iter().filter(|t| !fillers.contains(*t)).cloned().collect()
}

/// Drop tokens whose conditional probability given the kept prefix is below `xi`.
///
/// Returns the kept tokens and the input positions that were dropped. The
/// history for later tokens is the repaired (kept) prefix.
pub fn filter_abnormal(tokens: &[String], lm: &NGramLm, xi: f64) -> Result<(Vec<String>, Vec<usize>), NormalizeError> {
    if !(0.0..1.0).contains(&xi) {
        return Err(NormalizeError::BadThreshold(xi));
    }
    let mut kept: Vec<String> = Vec::with_capacity(tokens.len());
    let mut dropped = Vec::new();
    for (pos, tok) in tokens.iter().enumerate() {
        if lm.conditional(&kept, tok)? < xi {
            dropped.push(pos);
        } else {
            kept.push(tok.clone());
        }
    }
    Ok((kept, dropped))
}

/// What the normalization stages removed.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NormalizationTrace {
    pub fillers_removed: usize,
    pub repetition_tokens_removed: usize,
    pub abnormal_dropped: Vec<String>,
}

/// Run fillers, repetitions and, when a model is supplied, the abnormal filter.
/// Returns the indices of the surviving input tokens.
pub fn normalize(
    tokens: &[String],
    config: &NormalizerConfig,
    lm: Option<&NGramLm>,
) -> Result<(Vec<usize>, NormalizationTrace), NormalizeError> {
    let mut trace = NormalizationTrace::default();
    let survivors: Vec<usize> = (0..tokens.len())
        .filter(|&i| !config.fillers.contains(&tokens[i]))
        .collect();
    trace.fillers_removed = tokens.len() - survivors.len();

    let surf: Vec<String> = survivors.iter().map(|&i| tokens[i].clone()).collect();
    let collapsed = remove_repetitions(&surf, &config.whitelist);
    trace.repetition_tokens_removed = surf.len() - collapsed.len();
    let survivors = match_subsequence(&surf, &collapsed, &survivors);

    let Some(lm) = lm else { return Ok((survivors, trace)) };
    let (_, dropped) = filter_abnormal(&collapsed, lm, config.xi)?;
    trace.abnormal_dropped = dropped.iter().map(|&p| collapsed[p].clone()).collect();
    let survivors = survivors
        .into_iter()
        .enumerate()
        .filter(|(p, _)| dropped.binary_search(p).is_err())
        .map(|(_, i)| i)
        .collect();
    Ok((survivors, trace))
}

/// Leftmost embedding of `sub` in `full`, reported as the indices carried alongside `full`.
fn match_subsequence(full: &[String], sub: &[String], carried: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(sub.len());
    for (i, tok) in full.iter().enumerate() {
        if out.len() < sub.len() && *tok == sub[out.len()] {
            out.push(carried[i]);
        }
    }
    out
}
