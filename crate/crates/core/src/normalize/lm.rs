//! Additively smoothed n-gram language model.
//!
//! `P(w | h) = (c(h, w) + alpha) / (c(h) + alpha * V)` where `h` is the
//! history truncated to `order - 1` tokens, `c(h)` counts occurrences of `h`
//! followed by any token, and `V` is the number of training types plus one
//! for unseen tokens. Sentences are not padded, so the first token of a
//! sequence is scored by its unigram estimate.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LmError {
    #[error("language model has no training data")]
    Untrained,
    #[error("order must be at least 1")]
    BadOrder,
    #[error("smoothing constant must be positive and finite, got {0}")]
    BadAlpha(f64),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramLm {
    order: usize,
    alpha: f64,
    ngrams: HashMap<Vec<String>, u64>,
    contexts: HashMap<Vec<String>, u64>,
    vocab: BTreeSet<String>,
    total: u64,
}

const LM_MAGIC: &str = "simtrans-ngram";
const LM_VERSION: u32 = 1;

impl NGramLm {
    pub const DEFAULT_ORDER: usize = 3;
    pub const DEFAULT_ALPHA: f64 = 0.1;

    fn empty(order: usize, alpha: f64) -> Result<Self, LmError> {
        if order == 0 {
            return Err(LmError::BadOrder);
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(LmError::BadAlpha(alpha));
        }
        Ok(NGramLm {
            order,
            alpha,
            ngrams: HashMap::new(),
            contexts: HashMap::new(),
            vocab: BTreeSet::new(),
            total: 0,
        })
    }

    pub fn train<S: AsRef<[String]>>(sentences: &[S], order: usize, alpha: f64) -> Result<Self, LmError> {
        let mut lm = Self::empty(order, alpha)?;
        for s in sentences {
            let s = s.as_ref();
            for i in 0..s.len() {
                for k in 1..=order.min(i + 1) {
                    let gram = s[i + 1 - k..=i].to_vec();
                    lm.add_ngram(gram, 1);
                }
            }
        }
        Ok(lm)
    }

    fn add_ngram(&mut self, gram: Vec<String>, count: u64) {
        if gram.len() == 1 {
            self.total += count;
            self.vocab.insert(gram[0].clone());
        } else {
            *self.contexts.entry(gram[..gram.len() - 1].to_vec()).or_default() += count;
        }
        *self.ngrams.entry(gram).or_default() += count;
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Training types plus one slot for unseen tokens.
    pub fn vocab_size(&self) -> usize {
        self.vocab.len() + 1
    }

    pub fn is_trained(&self) -> bool {
        self.total > 0
    }

    /// `P(token | history)`, using at most the last `order - 1` history tokens.
    pub fn conditional(&self, history: &[String], token: &str) -> Result<f64, LmError> {
        if !self.is_trained() {
            return Err(LmError::Untrained);
        }
        let keep = history.len().min(self.order - 1);
        let h = &history[history.len() - keep..];
        let v = self.vocab_size() as f64;
        let mut gram = h.to_vec();
        gram.push(token.to_string());
        let c = self.ngrams.get(&gram).copied().unwrap_or(0) as f64;
        let ch = if h.is_empty() {
            self.total
        } else {
            self.contexts.get(h).copied().unwrap_or(0)
        } as f64;
        Ok((c + self.alpha) / (ch + self.alpha * v))
    }

    /// Natural-log probability of the sequence under the chain rule.
    pub fn seq_logprob(&self, tokens: &[String]) -> Result<f64, LmError> {
        if !self.is_trained() {
            return Err(LmError::Untrained);
        }
        let mut lp = 0.0;
        for i in 0..tokens.len() {
            lp += self.conditional(&tokens[..i], &tokens[i])?.ln();
        }
        Ok(lp)
    }

    /// Flat count file: a header line, then `count TAB n-gram` records.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{LM_MAGIC}\t{LM_VERSION}\t{}\t{}\t{}",
            self.order,
            self.alpha,
            self.vocab_size()
        );
        let sorted: BTreeMap<&Vec<String>, &u64> = self.ngrams.iter().collect();
        for (gram, count) in sorted {
            let _ = writeln!(out, "{count}\t{}", gram.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, LmError> {
        let err = |line: usize, msg: &str| LmError::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty file"))?;
        let h: Vec<&str> = header.split('\t').collect();
        if h.len() != 5 || h[0] != LM_MAGIC || h[1] != LM_VERSION.to_string() {
            return Err(err(1, "unsupported header"));
        }
        let order: usize = h[2].parse().map_err(|_| err(1, "bad order"))?;
        let alpha: f64 = h[3].parse().map_err(|_| err(1, "bad alpha"))?;
        let vocab_size: usize = h[4].parse().map_err(|_| err(1, "bad vocabulary size"))?;
        let mut lm = Self::empty(order, alpha)?;
        for (line, l) in lines {
            if l.is_empty() {
                continue;
            }
            let (count, gram) = l
                .split_once('\t')
                .ok_or_else(|| err(line, "expected count TAB n-gram"))?;
            let count: u64 = count.parse().map_err(|_| err(line, "bad count"))?;
            let gram: Vec<String> = gram.split_whitespace().map(String::from).collect();
            if gram.is_empty() || gram.len() > order {
                return Err(err(line, "n-gram length outside 1..=order"));
            }
            lm.add_ngram(gram, count);
        }
        if lm.vocab_size() != vocab_size {
            return Err(err(1, "vocabulary size does not match the unigram records"));
        }
        Ok(lm)
    }
}
