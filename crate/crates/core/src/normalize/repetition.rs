//! Collapsing of unconscious repetitions.
//!
//! A repetition is a square: a block `w` immediately followed by another copy
//! of itself. The leftmost square is located, preferring the longest block at
//! that position, and the whole run of consecutive copies is reduced to one.
//! This repeats until only whitelisted squares remain, which makes the
//! operation idempotent.
//!
//! Squares are found with the checkpoint technique: every square of period `L`
//! covers a position that is a multiple of `L`, so comparing the forward and
//! backward extensions at positions `kL` and `(k+1)L` finds them all with
//! `O(n log n)` constant-time LCE queries on a suffix array.

use std::collections::{HashMap, HashSet};

use super::suffix::Lce;

/// Token sequences that look repeated but must be left as written.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Whitelist {
    entries: HashSet<Vec<String>>,
    lengths: HashSet<usize>,
}

impl Whitelist {
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: IntoIterator,
        S::Item: Into<String>,
    {
        let mut wl = Whitelist::default();
        for e in entries {
            let seq: Vec<String> = e.into_iter().map(Into::into).collect();
            if !seq.is_empty() {
                wl.lengths.insert(seq.len());
                wl.entries.insert(seq);
            }
        }
        wl
    }

    /// One entry per line, tokens separated by whitespace.
    pub fn parse(text: &str) -> Self {
        Whitelist::new(
            text.lines()
                .map(|l| l.split_whitespace().map(String::from).collect::<Vec<_>>()),
        )
    }

    pub fn contains(&self, span: &[String]) -> bool {
        self.lengths.contains(&span.len()) && self.entries.contains(span)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn intern(tokens: &[String]) -> Vec<u32> {
    let mut ids: HashMap<&str, u32> = HashMap::new();
    tokens
        .iter()
        .map(|t| {
            let next = ids.len() as u32;
            *ids.entry(t.as_str()).or_insert(next)
        })
        .collect()
}

/// Leftmost collapsible square as `(start, period)`, longest period first.
fn leftmost_square(tokens: &[String], whitelist: &Whitelist) -> Option<(usize, usize, Lce)> {
    let n = tokens.len();
    if n < 2 {
        return None;
    }
    let ids = intern(tokens);
    let forward = Lce::new(&ids);
    let reversed: Vec<u32> = ids.iter().rev().copied().collect();
    let backward = Lce::new(&reversed);
    // common suffix length of the prefixes ending at i and j
    let back = |i: usize, j: usize| backward.query(n - 1 - i, n - 1 - j);

    let mut best: Option<(usize, usize)> = None;
    for period in 1..=n / 2 {
        let mut p = 0;
        while p + period < n {
            let q = p + period;
            let f = forward.query(p, q);
            let b = if p > 0 { back(p - 1, q - 1).min(period) } else { 0 };
            if f + b >= period {
                let lo = p - b;
                let hi = p + f - period;
                let start = (lo..=hi).find(|&s| !whitelist.contains(&tokens[s..s + 2 * period]));
                if let Some(s) = start {
                    let better = match best {
                        None => true,
                        Some((bs, bl)) => s < bs || (s == bs && period > bl),
                    };
                    if better {
                        best = Some((s, period));
                    }
                }
            }
            p += period;
        }
    }
    best.map(|(s, l)| (s, l, forward))
}

/// Collapse adjacent repeated blocks until none remain outside the whitelist.
pub fn remove_repetitions(tokens: &[String], whitelist: &Whitelist) -> Vec<String> {
    let mut cur = tokens.to_vec();
    while let Some((start, period, lce)) = leftmost_square(&cur, whitelist) {
        let copies = 1 + lce.query(start, start + period) / period;
        cur.drain(start + period..start + copies * period);
    }
    cur
}
