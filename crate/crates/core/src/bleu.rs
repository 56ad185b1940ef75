//! Corpus-level 4-gram overlap score with brevity penalty.
//!
//! `BLEU = BP * exp(mean_n ln p_n) * 100` for `n = 1..=4`, where `p_n` is the
//! clipped n-gram match count summed over the corpus divided by the total
//! hypothesis n-gram count, and `BP = min(1, exp(1 - r / c))` with `r` and `c`
//! the total reference and hypothesis lengths. Any `p_n = 0` gives 0.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Error, PartialEq)]
#[error("{hypotheses} hypotheses but {references} references")]
pub struct BleuError {
    pub hypotheses: usize,
    pub references: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuScore {
    pub score: f64,
    /// Clipped matches and totals per order.
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub hyp_len: usize,
    pub ref_len: usize,
    pub brevity_penalty: f64,
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w).or_default() += 1;
    }
    counts
}

pub fn corpus_bleu<H: AsRef<[String]>, R: AsRef<[String]>>(
    hypotheses: &[H],
    references: &[R],
) -> Result<BleuScore, BleuError> {
    if hypotheses.len() != references.len() {
        return Err(BleuError {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    let mut matches = [0; MAX_ORDER];
    let mut totals = [0; MAX_ORDER];
    let (mut hyp_len, mut ref_len) = (0, 0);
    for (h, r) in hypotheses.iter().zip(references) {
        let (h, r) = (h.as_ref(), r.as_ref());
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=MAX_ORDER {
            let rc = ngram_counts(r, n);
            for (gram, c) in ngram_counts(h, n) {
                matches[n - 1] += c.min(rc.get(gram).copied().unwrap_or(0));
            }
            totals[n - 1] += h.len().saturating_sub(n - 1);
        }
    }
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    };
    let score = if matches.contains(&0) {
        0.0
    } else {
        let log_mean = (0..MAX_ORDER)
            .map(|k| (matches[k] as f64 / totals[k] as f64).ln())
            .sum::<f64>()
            / MAX_ORDER as f64;
        brevity_penalty * log_mean.exp() * 100.0
    };
    Ok(BleuScore {
        score,
        matches,
        totals,
        hyp_len,
        ref_len,
        brevity_penalty,
    })
}
