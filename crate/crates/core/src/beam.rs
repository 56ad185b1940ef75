//! Beam search with must-include and forbidden target phrases.
//!
//! Positive phrases follow dynamic beam allocation: at every step the beam is
//! split into banks by how many constraint tokens a hypothesis has satisfied,
//! each bank gets an equal share of the slots, and unused slots go to the best
//! remaining candidates. A hypothesis may only end once all positive phrases
//! appear in it. Any expansion completing a forbidden phrase is pruned.
//!
//! Phrase matching runs on an Aho-Corasick automaton over all phrases, so one
//! token can complete several overlapping phrases at once.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, VecDeque};

use thiserror::Error;

use crate::policy::{OracleError, TranslationOracle};

pub type TokenId = usize;

/// Token id that never matches any phrase.
pub const NO_TOKEN: TokenId = usize::MAX;

#[derive(Debug, Error, PartialEq)]
pub enum BeamError {
    #[error("no hypothesis satisfies the constraints within {max_len} tokens")]
    Infeasible { max_len: usize },
    #[error("beam size and maximum length must be at least 1")]
    BadParameters,
    #[error("constraint phrases must be non-empty")]
    EmptyPhrase,
    #[error("constraint phrases may not contain the end-of-sequence token")]
    EosInPhrase,
}

/// Per-step scores over a fixed vocabulary.
pub trait StepScorer: Sync {
    fn vocab_size(&self) -> usize;
    fn eos(&self) -> TokenId;
    /// One finite score per vocabulary entry, higher is better.
    fn next_scores(&self, prefix: &[TokenId]) -> Vec<f64>;
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintSet {
    positive: Vec<Vec<TokenId>>,
    negative: Vec<Vec<TokenId>>,
}

impl ConstraintSet {
    pub fn new(positive: Vec<Vec<TokenId>>, negative: Vec<Vec<TokenId>>) -> Result<Self, BeamError> {
        if positive.iter().chain(&negative).any(Vec::is_empty) {
            return Err(BeamError::EmptyPhrase);
        }
        Ok(ConstraintSet { positive, negative })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn positive(&self) -> &[Vec<TokenId>] {
        &self.positive
    }

    pub fn negative(&self) -> &[Vec<TokenId>] {
        &self.negative
    }

    pub fn is_empty(&self) -> bool {
        self.positive.is_empty() && self.negative.is_empty()
    }

    fn positive_tokens(&self) -> usize {
        self.positive.iter().map(Vec::len).sum()
    }
}

/// One phrase per line, tokens separated by whitespace.
pub fn parse_phrases(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split_whitespace().map(String::from).collect::<Vec<_>>())
        .filter(|p| !p.is_empty())
        .collect()
}

#[derive(Debug, Clone, Default)]
struct Node {
    next: BTreeMap<TokenId, usize>,
    fail: usize,
    /// Phrase ids ending here, including those reached through failure links.
    outputs: Vec<usize>,
}

/// Aho-Corasick automaton over positive then negative phrases.
#[derive(Debug, Clone)]
pub struct PhraseMatcher {
    nodes: Vec<Node>,
    positive: usize,
}

/// Automaton state after a prefix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct MatchState(usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchStep {
    pub state: MatchState,
    /// Positive phrase indices completed by this token.
    pub completed: Vec<usize>,
    /// A forbidden phrase was completed by this token.
    pub violated: bool,
}

impl PhraseMatcher {
    pub fn new(constraints: &ConstraintSet) -> Self {
        let mut nodes = vec![Node::default()];
        let phrases = constraints.positive.iter().chain(&constraints.negative);
        for (id, phrase) in phrases.enumerate() {
            let mut cur = 0;
            for &tok in phrase {
                cur = match nodes[cur].next.get(&tok) {
                    Some(&n) => n,
                    None => {
                        nodes.push(Node::default());
                        let n = nodes.len() - 1;
                        nodes[cur].next.insert(tok, n);
                        n
                    }
                };
            }
            nodes[cur].outputs.push(id);
        }
        // breadth-first failure links
        let mut queue: VecDeque<usize> = nodes[0].next.values().copied().collect();
        while let Some(u) = queue.pop_front() {
            let children: Vec<(TokenId, usize)> = nodes[u].next.iter().map(|(&t, &v)| (t, v)).collect();
            for (tok, v) in children {
                let mut f = nodes[u].fail;
                let fail = loop {
                    if let Some(&n) = nodes[f].next.get(&tok) {
                        if n != v {
                            break n;
                        }
                    }
                    if f == 0 {
                        break 0;
                    }
                    f = nodes[f].fail;
                };
                nodes[v].fail = fail;
                let inherited = nodes[fail].outputs.clone();
                nodes[v].outputs.extend(inherited);
                queue.push_back(v);
            }
        }
        PhraseMatcher {
            nodes,
            positive: constraints.positive.len(),
        }
    }

    pub fn start(&self) -> MatchState {
        MatchState(0)
    }

    pub fn advance(&self, state: MatchState, token: TokenId) -> MatchStep {
        let mut cur = state.0;
        let next = loop {
            if let Some(&n) = self.nodes[cur].next.get(&token) {
                break n;
            }
            if cur == 0 {
                break 0;
            }
            cur = self.nodes[cur].fail;
        };
        let mut completed = Vec::new();
        let mut violated = false;
        for &id in &self.nodes[next].outputs {
            if id < self.positive {
                completed.push(id);
            } else {
                violated = true;
            }
        }
        completed.sort_unstable();
        completed.dedup();
        MatchStep {
            state: MatchState(next),
            completed,
            violated,
        }
    }
}

/// Automaton transition for `token` under the phrases of `constraints`.
pub fn match_state_advance(matcher: &PhraseMatcher, state: MatchState, token: TokenId) -> MatchStep {
    matcher.advance(state, token)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamHypothesis {
    /// Generated tokens, without the final end-of-sequence token.
    pub tokens: Vec<TokenId>,
    /// Sum of step scores including the end-of-sequence step.
    pub score: f64,
}

#[derive(Debug, Clone)]
struct Hyp {
    tokens: Vec<TokenId>,
    score: f64,
    state: MatchState,
    met: Vec<bool>,
    met_tokens: usize,
    finished: bool,
}

fn rank(a: &Hyp, b: &Hyp) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.finished.cmp(&b.finished))
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Fewest extra tokens needed to complete every unmet positive phrase, taking
/// the longest partial match at the end of `tokens` into account.
fn remaining_lower_bound(tokens: &[TokenId], context: &[TokenId], constraints: &ConstraintSet, met: &[bool]) -> usize {
    let mut bound = 0;
    for (phrase, _) in constraints.positive.iter().zip(met).filter(|(_, m)| !**m) {
        let mut overlap = 0;
        for k in (1..phrase.len()).rev() {
            if ends_with(context, tokens, &phrase[..k]) {
                overlap = k;
                break;
            }
        }
        bound = bound.max(phrase.len() - overlap);
    }
    bound
}

fn ends_with(context: &[TokenId], tokens: &[TokenId], suffix: &[TokenId]) -> bool {
    let total = context.len() + tokens.len();
    if suffix.len() > total {
        return false;
    }
    let at = |i: usize| {
        if i < context.len() {
            context[i]
        } else {
            tokens[i - context.len()]
        }
    };
    suffix
        .iter()
        .enumerate()
        .all(|(k, &t)| at(total - suffix.len() + k) == t)
}

/// Constrained beam search from an empty prefix.
pub fn beam_search<S: StepScorer + ?Sized>(
    scorer: &S,
    constraints: &ConstraintSet,
    beam_size: usize,
    max_len: usize,
) -> Result<BeamHypothesis, BeamError> {
    beam_search_with_context(scorer, constraints, beam_size, max_len, &[])
}

/// Constrained beam search whose phrase matching starts after `context`.
///
/// `context` tokens are not generated or scored; they only seed the matcher
/// so phrases may straddle the boundary, and positive phrases already present
/// in them count as satisfied.
pub fn beam_search_with_context<S: StepScorer + ?Sized>(
    scorer: &S,
    constraints: &ConstraintSet,
    beam_size: usize,
    max_len: usize,
    context: &[TokenId],
) -> Result<BeamHypothesis, BeamError> {
    if beam_size == 0 || max_len == 0 {
        return Err(BeamError::BadParameters);
    }
    let eos = scorer.eos();
    if constraints
        .positive
        .iter()
        .chain(&constraints.negative)
        .any(|p| p.contains(&eos))
    {
        return Err(BeamError::EosInPhrase);
    }
    let matcher = PhraseMatcher::new(constraints);
    let mut root = Hyp {
        tokens: Vec::new(),
        score: 0.0,
        state: matcher.start(),
        met: vec![false; constraints.positive.len()],
        met_tokens: 0,
        finished: false,
    };
    for &t in context {
        let step = matcher.advance(root.state, t);
        root.state = step.state;
        for id in step.completed {
            if !root.met[id] {
                root.met[id] = true;
                root.met_tokens += constraints.positive[id].len();
            }
        }
    }

    let banks = constraints.positive_tokens() + 1;
    let mut active = vec![root];
    let mut finished: Vec<Hyp> = Vec::new();
    for _ in 0..=max_len {
        if active.is_empty() {
            break;
        }
        let mut candidates = Vec::new();
        for hyp in &active {
            let scores = scorer.next_scores(&hyp.tokens);
            for (tok, &s) in scores.iter().enumerate() {
                if tok == eos {
                    if hyp.met.iter().all(|m| *m) {
                        candidates.push(Hyp {
                            score: hyp.score + s,
                            finished: true,
                            ..hyp.clone()
                        });
                    }
                    continue;
                }
                if hyp.tokens.len() == max_len {
                    continue;
                }
                let step = matcher.advance(hyp.state, tok);
                if step.violated {
                    continue;
                }
                let mut next = Hyp {
                    score: hyp.score + s,
                    state: step.state,
                    ..hyp.clone()
                };
                next.tokens.push(tok);
                for id in step.completed {
                    if !next.met[id] {
                        next.met[id] = true;
                        next.met_tokens += constraints.positive[id].len();
                    }
                }
                let left = max_len - next.tokens.len();
                if remaining_lower_bound(&next.tokens, context, constraints, &next.met) > left {
                    continue;
                }
                candidates.push(next);
            }
        }
        // completed hypotheses leave the beam without using a slot
        let (done, mut open): (Vec<Hyp>, Vec<Hyp>) = candidates.into_iter().partition(|h| h.finished);
        finished.extend(done);
        open.sort_by(rank);
        active = allocate(open, beam_size, banks);
    }
    finished
        .into_iter()
        .min_by(rank)
        .map(|h| BeamHypothesis {
            tokens: h.tokens,
            score: h.score,
        })
        .ok_or(BeamError::Infeasible { max_len })
}

/// Split `beam_size` slots evenly across banks of equal satisfied-token count,
/// then hand any unused slots to the best leftover candidates.
/// `candidates` must already be sorted best first; the output keeps that order.
fn allocate(candidates: Vec<Hyp>, beam_size: usize, banks: usize) -> Vec<Hyp> {
    if candidates.len() <= beam_size {
        return candidates;
    }
    let per_bank = beam_size / banks;
    let mut taken = vec![false; candidates.len()];
    let mut used = vec![0usize; banks];
    let mut count = 0;
    // the remainder goes to the banks closest to completion
    let quota = |bank: usize| per_bank + usize::from(bank >= banks - beam_size % banks);
    for (i, h) in candidates.iter().enumerate() {
        let bank = h.met_tokens.min(banks - 1);
        if used[bank] < quota(bank) {
            used[bank] += 1;
            taken[i] = true;
            count += 1;
        }
    }
    for t in taken.iter_mut() {
        if count >= beam_size {
            break;
        }
        if !*t {
            *t = true;
            count += 1;
        }
    }
    candidates
        .into_iter()
        .zip(taken)
        .filter_map(|(h, t)| t.then_some(h))
        .collect()
}

/// Ordinary beam search with no constraints and no banking.
pub fn plain_beam_search<S: StepScorer + ?Sized>(
    scorer: &S,
    beam_size: usize,
    max_len: usize,
) -> Result<BeamHypothesis, BeamError> {
    if beam_size == 0 || max_len == 0 {
        return Err(BeamError::BadParameters);
    }
    let eos = scorer.eos();
    let mut active: Vec<(Vec<TokenId>, f64)> = vec![(Vec::new(), 0.0)];
    let mut best: Option<(Vec<TokenId>, f64)> = None;
    let better = |a: &(Vec<TokenId>, f64, bool), b: &(Vec<TokenId>, f64, bool)| {
        b.1.total_cmp(&a.1)
            .then_with(|| a.2.cmp(&b.2))
            .then_with(|| a.0.cmp(&b.0))
    };
    for _ in 0..=max_len {
        if active.is_empty() {
            break;
        }
        let mut cands: Vec<(Vec<TokenId>, f64, bool)> = Vec::new();
        for (tokens, score) in &active {
            for (tok, s) in scorer.next_scores(tokens).into_iter().enumerate() {
                if tok == eos {
                    cands.push((tokens.clone(), score + s, true));
                } else if tokens.len() < max_len {
                    let mut t = tokens.clone();
                    t.push(tok);
                    cands.push((t, score + s, false));
                }
            }
        }
        let (done, mut open): (Vec<_>, Vec<_>) = cands.into_iter().partition(|c| c.2);
        for (tokens, score, _) in done {
            let replace = match &best {
                None => true,
                Some((bt, bs)) => score > *bs || (score == *bs && tokens < *bt),
            };
            if replace {
                best = Some((tokens, score));
            }
        }
        open.sort_by(better);
        open.truncate(beam_size);
        active = open.into_iter().map(|(t, s, _)| (t, s)).collect();
    }
    best.map(|(tokens, score)| BeamHypothesis { tokens, score })
        .ok_or(BeamError::Infeasible { max_len })
}

/// String vocabulary for mapping phrases onto token ids.
#[derive(Debug, Clone, Default)]
pub struct Vocab {
    ids: HashMap<String, TokenId>,
    words: Vec<String>,
}

impl Vocab {
    pub fn id_or_insert(&mut self, word: &str) -> TokenId {
        if let Some(&id) = self.ids.get(word) {
            return id;
        }
        self.words.push(word.to_string());
        self.ids.insert(word.to_string(), self.words.len() - 1);
        self.words.len() - 1
    }

    pub fn get(&self, word: &str) -> Option<TokenId> {
        self.ids.get(word).copied()
    }

    pub fn word(&self, id: TokenId) -> &str {
        &self.words[id]
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Following the wrapped backend's tail costs 0, each substituted, inserted
/// or dropped token costs 1.
struct FollowScorer {
    expected: Vec<TokenId>,
    vocab_size: usize,
    eos: TokenId,
}

impl StepScorer for FollowScorer {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn eos(&self) -> TokenId {
        self.eos
    }

    fn next_scores(&self, prefix: &[TokenId]) -> Vec<f64> {
        let t = prefix.len();
        let wanted = self.expected.get(t).copied().unwrap_or(self.eos);
        (0..self.vocab_size)
            .map(|tok| match tok {
                _ if tok == wanted => 0.0,
                // ending early drops every remaining backend token
                _ if tok == self.eos => -((self.expected.len() - t) as f64),
                _ => -1.0,
            })
            .collect()
    }
}

/// Wraps a backend so its output obeys must-include and forbidden phrases.
///
/// The wrapped backend proposes a continuation; beam search then finds the
/// closest continuation (fewest deviating tokens) that satisfies the phrases,
/// treating the forced prefix as already emitted context.
pub struct ConstrainedOracle<O> {
    inner: O,
    positive: Vec<Vec<String>>,
    negative: Vec<Vec<String>>,
    beam_size: usize,
}

impl<O: TranslationOracle> ConstrainedOracle<O> {
    pub fn new(inner: O, positive: Vec<Vec<String>>, negative: Vec<Vec<String>>) -> Self {
        ConstrainedOracle {
            inner,
            positive,
            negative,
            beam_size: 8,
        }
    }

    pub fn with_beam_size(mut self, beam_size: usize) -> Self {
        self.beam_size = beam_size;
        self
    }
}

impl<O: TranslationOracle> TranslationOracle for ConstrainedOracle<O> {
    fn generate(&self, source: &[String], forced_prefix: &[String]) -> Result<Vec<String>, OracleError> {
        let base = self.inner.generate(source, forced_prefix)?;
        if self.positive.is_empty() && self.negative.is_empty() {
            return Ok(base);
        }
        let tail = base.get(forced_prefix.len()..).unwrap_or(&[]);
        let mut vocab = Vocab::default();
        let expected: Vec<TokenId> = tail.iter().map(|w| vocab.id_or_insert(w)).collect();
        let mut ids = |phrases: &[Vec<String>]| -> Vec<Vec<TokenId>> {
            phrases
                .iter()
                .map(|p| p.iter().map(|w| vocab.id_or_insert(w)).collect())
                .collect()
        };
        let positive = ids(&self.positive);
        let negative = ids(&self.negative);
        let eos = vocab.len();
        let context: Vec<TokenId> = forced_prefix.iter().map(|w| vocab.get(w).unwrap_or(NO_TOKEN)).collect();
        let constraints = ConstraintSet::new(positive, negative).map_err(|e| OracleError(e.to_string()))?;
        let scorer = FollowScorer {
            expected,
            vocab_size: eos + 1,
            eos,
        };
        let max_len = (tail.len() + constraints.positive_tokens()).max(1);
        let best = beam_search_with_context(&scorer, &constraints, self.beam_size, max_len, &context)
            .map_err(|e| OracleError(format!("constrained decoding: {e}")))?;
        let mut out = forced_prefix.to_vec();
        out.extend(best.tokens.iter().map(|&t| vocab.word(t).to_string()));
        Ok(out)
    }
}
