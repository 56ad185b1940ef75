//! Sub-sentence pair extraction from word-aligned bitext.
//!
//! A prefix pair `(x_1..x_i, y_1..y_j)` is a boundary when `(i, j)` is itself
//! a link, no source token up to `i` links past `j`, and no source token after
//! `i` links into `y_1..y_j`. Links are 1-based in memory; Pharaoh files on
//! disk are 0-based.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AlignmentError {
    #[error("malformed alignment link {0:?}, expected `a-b`")]
    MalformedLink(String),
    #[error("link ({a}, {b}) outside a {n}x{m} sentence pair")]
    LinkOutOfRange { a: usize, b: usize, n: usize, m: usize },
    #[error("index ({i}, {j}) outside a {n}x{m} sentence pair")]
    IndexOutOfRange { i: usize, j: usize, n: usize, m: usize },
    #[error("({i}, {j}) is not a sub-sentence boundary")]
    NotABoundary { i: usize, j: usize },
    #[error("split ({i}, {j}) leaves no target tokens to train on")]
    EmptyTrainingRegion { i: usize, j: usize },
}

/// Set of 1-based `(source, target)` word links.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentSet {
    links: BTreeSet<(usize, usize)>,
}

impl AlignmentSet {
    pub fn new(links: impl IntoIterator<Item = (usize, usize)>) -> Self {
        AlignmentSet {
            links: links.into_iter().collect(),
        }
    }

    /// Parse one Pharaoh line (`0-0 1-2 ...`, 0-based) into 1-based links.
    pub fn from_pharaoh(line: &str) -> Result<Self, AlignmentError> {
        let mut links = BTreeSet::new();
        for item in line.split_whitespace() {
            let (a, b) = item
                .split_once('-')
                .ok_or_else(|| AlignmentError::MalformedLink(item.to_string()))?;
            let a: usize = a.parse().map_err(|_| AlignmentError::MalformedLink(item.to_string()))?;
            let b: usize = b.parse().map_err(|_| AlignmentError::MalformedLink(item.to_string()))?;
            links.insert((a + 1, b + 1));
        }
        Ok(AlignmentSet { links })
    }

    pub fn to_pharaoh(&self) -> String {
        self.links
            .iter()
            .map(|(a, b)| format!("{}-{}", a - 1, b - 1))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn check_bounds(&self, n: usize, m: usize) -> Result<(), AlignmentError> {
        for &(a, b) in &self.links {
            if a == 0 || b == 0 || a > n || b > m {
                return Err(AlignmentError::LinkOutOfRange { a, b, n, m });
            }
        }
        Ok(())
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.links.contains(&(a, b))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.links.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    /// The source prefix ends in a comma.
    SubSentence,
    Segment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubSentencePair {
    pub source_prefix: Vec<String>,
    pub target_prefix: Vec<String>,
    pub split_kind: SplitKind,
    /// 1-based boundary `(i, j)`.
    pub split: (usize, usize),
}

/// Check the three boundary conditions for the 1-based cell `(i, j)`.
pub fn is_pair_boundary(i: usize, j: usize, links: &AlignmentSet, n: usize, m: usize) -> Result<bool, AlignmentError> {
    if i == 0 || j == 0 || i > n || j > m {
        return Err(AlignmentError::IndexOutOfRange { i, j, n, m });
    }
    if !links.contains(i, j) {
        return Ok(false);
    }
    let ok = links.iter().all(|(a, b)| {
        let leaks_forward = a <= i && b > j;
        let leaks_backward = a > i && b <= j;
        !leaks_forward && !leaks_backward
    });
    Ok(ok)
}

/// All boundary cells in increasing source order. Runs in `O(n + m + |A|)`.
pub fn boundaries(links: &AlignmentSet, n: usize) -> Vec<(usize, usize)> {
    // max_upto[i]: largest target index linked from x_1..x_i (0 if none)
    // min_after[i]: smallest target index linked from x_{i+1}..x_n (usize::MAX if none)
    let mut max_upto = vec![0usize; n + 2];
    let mut min_after = vec![usize::MAX; n + 2];
    for (a, b) in links.iter() {
        if a <= n {
            max_upto[a] = max_upto[a].max(b);
            min_after[a - 1] = min_after[a - 1].min(b);
        }
    }
    for i in 1..=n {
        max_upto[i] = max_upto[i].max(max_upto[i - 1]);
    }
    for i in (0..n).rev() {
        min_after[i] = min_after[i].min(min_after[i + 1]);
    }
    links
        .iter()
        .filter(|&(a, b)| a <= n && max_upto[a] <= b && min_after[a] > b)
        .collect()
}

pub fn extract_pairs(
    source: &[String],
    target: &[String],
    links: &AlignmentSet,
    is_comma: impl Fn(&str) -> bool,
) -> Result<Vec<SubSentencePair>, AlignmentError> {
    links.check_bounds(source.len(), target.len())?;
    Ok(boundaries(links, source.len())
        .into_iter()
        .map(|(i, j)| SubSentencePair {
            source_prefix: source[..i].to_vec(),
            target_prefix: target[..j].to_vec(),
            split_kind: if is_comma(&source[i - 1]) {
                SplitKind::SubSentence
            } else {
                SplitKind::Segment
            },
            split: (i, j),
        })
        .collect())
}

/// Source/target prefixes for training the sentence-initial model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialRecord {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

impl PartialRecord {
    pub fn to_line(&self) -> String {
        format!("{}\t{}", self.source.join(" "), self.target.join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaskLabel {
    /// Supplied as forced prefix, excluded from the loss.
    Given,
    Train,
}

/// Full sentence pair whose leading target tokens are a given prefix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextRecord {
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub loss_mask: Vec<MaskLabel>,
}

impl ContextRecord {
    pub fn to_line(&self) -> String {
        let mask: Vec<&str> = self
            .loss_mask
            .iter()
            .map(|m| match m {
                MaskLabel::Given => "G",
                MaskLabel::Train => "T",
            })
            .collect();
        format!(
            "{}\t{}\t{}",
            self.source.join(" "),
            self.target.join(" "),
            mask.join(" ")
        )
    }
}

fn check_split(
    source: &[String],
    target: &[String],
    links: &AlignmentSet,
    split: (usize, usize),
) -> Result<(), AlignmentError> {
    let (i, j) = split;
    if !is_pair_boundary(i, j, links, source.len(), target.len())? {
        return Err(AlignmentError::NotABoundary { i, j });
    }
    Ok(())
}

/// Truncate the pair at a boundary: later tokens on both sides are masked out.
pub fn make_partial_corpus(
    source: &[String],
    target: &[String],
    links: &AlignmentSet,
    split: (usize, usize),
) -> Result<PartialRecord, AlignmentError> {
    check_split(source, target, links, split)?;
    Ok(PartialRecord {
        source: source[..split.0].to_vec(),
        target: target[..split.1].to_vec(),
    })
}

/// Keep the full pair and mark target positions `1..=j` as given.
pub fn make_context_corpus(
    source: &[String],
    target: &[String],
    links: &AlignmentSet,
    split: (usize, usize),
) -> Result<ContextRecord, AlignmentError> {
    check_split(source, target, links, split)?;
    let (i, j) = split;
    if j >= target.len() {
        return Err(AlignmentError::EmptyTrainingRegion { i, j });
    }
    let loss_mask = (1..=target.len())
        .map(|p| if p <= j { MaskLabel::Given } else { MaskLabel::Train })
        .collect();
    Ok(ContextRecord {
        source: source.to_vec(),
        target: target.to_vec(),
        loss_mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::is_comma;
    use proptest::prelude::*;

    fn w(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn diagonal(n: usize) -> AlignmentSet {
        AlignmentSet::new((1..=n).map(|i| (i, i)))
    }

    /// Literal check of the three conditions against every link.
    fn oracle_boundary(i: usize, j: usize, links: &[(usize, usize)]) -> bool {
        links.contains(&(i, j))
            && !links
                .iter()
                .any(|&(a, b)| (1 <= a && a <= i && b > j) || (a > i && 1 <= b && b <= j))
    }

    fn oracle_all(n: usize, m: usize, links: &[(usize, usize)]) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for i in 1..=n {
            for j in 1..=m {
                if oracle_boundary(i, j, links) {
                    v.push((i, j));
                }
            }
        }
        v
    }

    #[test]
    fn diagonal_boundary() {
        assert_eq!(is_pair_boundary(2, 2, &diagonal(4), 4, 4), Ok(true));
        assert_eq!(is_pair_boundary(4, 4, &diagonal(4), 4, 4), Ok(true));
        assert_eq!(is_pair_boundary(2, 3, &diagonal(4), 4, 4), Ok(false));
    }

    #[test]
    fn crossing_is_not_a_boundary() {
        let a = AlignmentSet::new([(1, 2), (2, 1)]);
        assert_eq!(is_pair_boundary(1, 2, &a, 2, 2), Ok(false));
        assert_eq!(is_pair_boundary(2, 1, &a, 2, 2), Ok(false));
        assert_eq!(boundaries(&a, 2), vec![]);
        assert!(is_pair_boundary(0, 1, &a, 2, 2).is_err());
        assert!(is_pair_boundary(1, 3, &a, 2, 2).is_err());
    }

    #[test]
    fn full_sentence_boundary_for_in_range_links() {
        // (n, m) is a boundary whenever it is a link: nothing can lie beyond it.
        let a = AlignmentSet::new([(1, 3), (2, 1), (3, 2), (3, 3)]);
        assert_eq!(is_pair_boundary(3, 3, &a, 3, 3), Ok(true));
    }

    #[test]
    fn extract_with_comma() {
        let x = w("x1 ， x3 x4");
        let y = w("y1 y2 y3 y4");
        let pairs = extract_pairs(&x, &y, &diagonal(4), is_comma).unwrap();
        let got: Vec<((usize, usize), SplitKind)> = pairs.iter().map(|p| (p.split, p.split_kind)).collect();
        assert_eq!(
            got,
            vec![
                ((1, 1), SplitKind::Segment),
                ((2, 2), SplitKind::SubSentence),
                ((3, 3), SplitKind::Segment),
                ((4, 4), SplitKind::Segment),
            ]
        );
        assert_eq!(pairs[1].source_prefix, w("x1 ，"));
        assert_eq!(pairs[1].target_prefix, w("y1 y2"));
        assert!(extract_pairs(&x, &y, &AlignmentSet::default(), is_comma)
            .unwrap()
            .is_empty());
        let bad = AlignmentSet::new([(5, 1)]);
        assert!(extract_pairs(&x, &y, &bad, is_comma).is_err());
    }

    #[test]
    fn pharaoh_is_zero_based_on_disk() {
        let a = AlignmentSet::from_pharaoh("0-0 1-2 2-1").unwrap();
        assert!(a.contains(1, 1) && a.contains(2, 3) && a.contains(3, 2));
        assert_eq!(a.to_pharaoh(), "0-0 1-2 2-1");
        assert!(AlignmentSet::from_pharaoh("0-0 1_2").is_err());
        assert!(AlignmentSet::from_pharaoh("").unwrap().is_empty());
    }

    #[test]
    fn partial_records() {
        let x = w("x1 x2 x3 x4");
        let y = w("y1 y2 y3 y4");
        let r = make_partial_corpus(&x, &y, &diagonal(4), (2, 2)).unwrap();
        assert_eq!(
            r,
            PartialRecord {
                source: w("x1 x2"),
                target: w("y1 y2")
            }
        );
        let full = make_partial_corpus(&x, &y, &diagonal(4), (4, 4)).unwrap();
        assert_eq!((full.source, full.target), (x.clone(), y.clone()));
        assert_eq!(
            make_partial_corpus(&x, &y, &diagonal(4), (2, 3)),
            Err(AlignmentError::NotABoundary { i: 2, j: 3 })
        );
    }

    #[test]
    fn context_records() {
        use MaskLabel::*;
        let x = w("x1 x2 x3 x4");
        let y = w("y1 y2 y3 y4");
        let r = make_context_corpus(&x, &y, &diagonal(4), (2, 2)).unwrap();
        assert_eq!(r.loss_mask, vec![Given, Given, Train, Train]);
        assert_eq!(r.to_line(), "x1 x2 x3 x4\ty1 y2 y3 y4\tG G T T");
        assert_eq!(
            make_context_corpus(&x, &y, &diagonal(4), (4, 4)),
            Err(AlignmentError::EmptyTrainingRegion { i: 4, j: 4 })
        );
        assert!(matches!(
            make_context_corpus(&x, &y, &diagonal(4), (0, 0)),
            Err(AlignmentError::IndexOutOfRange { .. })
        ));
    }

    fn instance() -> impl Strategy<Value = (usize, usize, Vec<(usize, usize)>)> {
        (1usize..=10, 1usize..=10).prop_flat_map(|(n, m)| {
            (
                Just(n),
                Just(m),
                prop::collection::vec((1..=n, 1..=m), 0..=(n * m).min(20)),
            )
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force((n, m, raw) in instance()) {
            let links = AlignmentSet::new(raw.iter().copied());
            let dedup: Vec<(usize, usize)> = links.iter().collect();
            let fast = boundaries(&links, n);
            prop_assert_eq!(&fast, &oracle_all(n, m, &dedup));
            for w2 in fast.windows(2) {
                prop_assert!(w2[0].0 < w2[1].0 && w2[0].1 < w2[1].1);
            }
            for i in 1..=n {
                for j in 1..=m {
                    prop_assert_eq!(is_pair_boundary(i, j, &links, n, m).unwrap(), oracle_boundary(i, j, &dedup));
                }
            }
        }
    }
}
