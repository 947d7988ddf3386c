//! Token-based clone detection over normalized token streams.
//!
//! Clone classes are the maximal repeats of the corpus: normalized token
//! sequences occurring at least twice that cannot be extended to the left
//! or to the right in all occurrences at once. They are found as the
//! left-diverse lcp-intervals of a suffix array built over all files
//! concatenated with a unique sentinel after each file.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::scope::Token;

pub const CLONE_RATIO: &str = "clone.ratio";
pub const DEFAULT_MIN_LENGTH: usize = 25;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CloneError {
    #[error("minimum clone length must be at least 2, got {0}")]
    InvalidMinLength(usize),
}

/// One file of the clone corpus.
#[derive(Debug, Clone, Copy)]
pub struct CorpusFile<'a> {
    pub path: &'a str,
    pub tokens: &'a [Token],
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CloneOccurrence {
    pub path: String,
    /// Index of the first token.
    pub start: usize,
    /// Exclusive end token index.
    pub end: usize,
    pub start_line: u32,
    pub end_line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CloneClass {
    /// Length in normalized tokens.
    pub length: usize,
    pub occurrences: Vec<CloneOccurrence>,
}

/// Clone classes plus the line-based redundancy measure.
#[derive(Debug, Clone, PartialEq)]
pub struct CloneReport {
    pub min_length: usize,
    pub classes: Vec<CloneClass>,
    pub cloned_lines: BTreeMap<String, BTreeSet<u32>>,
    pub total_sloc: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloneRatio {
    pub ratio: f64,
    pub cloned_lines: BTreeMap<String, BTreeSet<u32>>,
    pub total_sloc: usize,
    pub warnings: Vec<String>,
}

pub fn detect_clones(corpus: &[CorpusFile<'_>], min_length: usize) -> Result<Vec<CloneClass>, CloneError> {
    if min_length < 2 {
        return Err(CloneError::InvalidMinLength(min_length));
    }
    let mut files: Vec<&CorpusFile<'_>> = corpus.iter().collect();
    files.sort_by(|a, b| a.path.cmp(b.path));

    // Intern normalized tokens; sentinels take ids above the vocabulary.
    let mut vocab: HashMap<&str, u32> = HashMap::new();
    let mut seq: Vec<u32> = Vec::new();
    let mut origin: Vec<(u32, u32)> = Vec::new(); // (file index, token index)
    let mut sentinel_at = Vec::new();
    for (fi, f) in files.iter().enumerate() {
        for (ti, t) in f.tokens.iter().enumerate() {
            let next = vocab.len() as u32;
            seq.push(*vocab.entry(t.normalized()).or_insert(next));
            origin.push((fi as u32, ti as u32));
        }
        sentinel_at.push(seq.len());
        seq.push(0);
        origin.push((fi as u32, u32::MAX));
    }
    let base = vocab.len() as u32;
    for (fi, &pos) in sentinel_at.iter().enumerate() {
        seq[pos] = base + fi as u32;
    }
    if seq.is_empty() {
        return Ok(Vec::new());
    }

    let sa = suffix_array(&seq);
    let lcp = lcp_array(&seq, &sa);
    let mut classes = Vec::new();
    for (length, lo, hi) in lcp_intervals(&lcp, min_length) {
        let positions = &sa[lo..=hi];
        let first_left = left_symbol(&seq, positions[0]);
        let left_diverse = first_left.is_none()
            || positions[1..]
                .iter()
                .any(|&p| left_symbol(&seq, p) != first_left);
        if !left_diverse {
            continue;
        }
        let mut occurrences: Vec<(u32, u32)> = positions.iter().map(|&p| origin[p]).collect();
        occurrences.sort_unstable();
        let occurrences = occurrences
            .into_iter()
            .map(|(fi, ti)| {
                let f = files[fi as usize];
                let (start, end) = (ti as usize, ti as usize + length);
                CloneOccurrence {
                    path: f.path.to_string(),
                    start,
                    end,
                    start_line: f.tokens[start].line,
                    end_line: f.tokens[end - 1].end_line,
                }
            })
            .collect();
        classes.push(CloneClass {
            length,
            occurrences,
        });
    }
    sort_classes(&mut classes);
    Ok(classes)
}

/// Orders classes by length (descending), then by first occurrence.
pub fn sort_classes(classes: &mut [CloneClass]) {
    classes.sort_by(|a, b| {
        b.length.cmp(&a.length).then_with(|| {
            let fa = &a.occurrences[0];
            let fb = &b.occurrences[0];
            (fa.path.as_str(), fa.start).cmp(&(fb.path.as_str(), fb.start))
        })
    });
}

/// Symbol preceding position `p`; `None` at the start of the sequence.
/// File starts are preceded by their predecessor's unique sentinel.
fn left_symbol(seq: &[u32], p: usize) -> Option<u32> {
    p.checked_sub(1).map(|q| seq[q])
}

/// Suffix array by prefix doubling.
fn suffix_array(seq: &[u32]) -> Vec<usize> {
    let n = seq.len();
    let mut sa: Vec<usize> = (0..n).collect();
    let mut rank: Vec<u64> = seq.iter().map(|&x| u64::from(x)).collect();
    let mut next = vec![0u64; n];
    let mut k = 1;
    loop {
        let key = |i: usize, rank: &[u64]| (rank[i], if i + k < n { rank[i + k] + 1 } else { 0 });
        sa.sort_unstable_by_key(|&i| key(i, &rank));
        next[sa[0]] = 0;
        for w in 1..n {
            let bump = u64::from(key(sa[w - 1], &rank) < key(sa[w], &rank));
            next[sa[w]] = next[sa[w - 1]] + bump;
        }
        std::mem::swap(&mut rank, &mut next);
        if rank[sa[n - 1]] as usize == n - 1 {
            break;
        }
        k *= 2;
    }
    sa
}

/// Kasai: `lcp[i]` is the longest common prefix of suffixes `sa[i-1]` and
/// `sa[i]`; `lcp[0] = 0`.
fn lcp_array(seq: &[u32], sa: &[usize]) -> Vec<usize> {
    let n = seq.len();
    let mut rank = vec![0usize; n];
    for (i, &p) in sa.iter().enumerate() {
        rank[p] = i;
    }
    let mut lcp = vec![0usize; n];
    let mut h = 0usize;
    for p in 0..n {
        if rank[p] == 0 {
            h = 0;
            continue;
        }
        let q = sa[rank[p] - 1];
        while p + h < n && q + h < n && seq[p + h] == seq[q + h] {
            h += 1;
        }
        lcp[rank[p]] = h;
        h = h.saturating_sub(1);
    }
    lcp
}

/// All lcp-intervals `(value, lo, hi)` with value >= `min` (inclusive bounds).
fn lcp_intervals(lcp: &[usize], min: usize) -> Vec<(usize, usize, usize)> {
    let n = lcp.len();
    let mut out = Vec::new();
    let mut stack: Vec<(usize, usize)> = vec![(0, 0)];
    for i in 1..=n {
        let cur = if i < n { lcp[i] } else { 0 };
        let mut lb = i - 1;
        while stack.last().is_some_and(|&(v, _)| v > cur) {
            let (v, l) = stack.pop().expect("non-empty");
            if v >= min {
                out.push((v, l, i - 1));
            }
            lb = l;
        }
        if stack.last().is_none_or(|&(v, _)| v < cur) {
            stack.push((cur, lb));
        }
    }
    out
}

fn token_lines(tokens: &[Token]) -> BTreeSet<u32> {
    tokens.iter().flat_map(|t| t.line..=t.end_line).collect()
}

/// Fraction of source lines covered by at least one clone occurrence.
pub fn cloning_ratio(classes: &[CloneClass], corpus: &[CorpusFile<'_>]) -> CloneRatio {
    let by_path: BTreeMap<&str, &CorpusFile<'_>> = corpus.iter().map(|f| (f.path, f)).collect();
    let total_sloc: usize = corpus.iter().map(|f| token_lines(f.tokens).len()).sum();
    let mut cloned_lines: BTreeMap<String, BTreeSet<u32>> = BTreeMap::new();
    for occ in classes.iter().flat_map(|c| &c.occurrences) {
        let Some(file) = by_path.get(occ.path.as_str()) else {
            continue;
        };
        cloned_lines
            .entry(occ.path.clone())
            .or_default()
            .extend(token_lines(&file.tokens[occ.start..occ.end]));
    }
    let mut warnings = Vec::new();
    let ratio = if total_sloc == 0 {
        warnings.push("clone corpus has no source lines; cloning ratio is 0".to_string());
        0.0
    } else {
        let cloned: usize = cloned_lines.values().map(BTreeSet::len).sum();
        cloned as f64 / total_sloc as f64
    };
    CloneRatio {
        ratio,
        cloned_lines,
        total_sloc,
        warnings,
    }
}

/// Runs detection and the ratio computation together.
pub fn analyze(corpus: &[CorpusFile<'_>], min_length: usize) -> Result<(CloneReport, Vec<String>), CloneError> {
    let classes = detect_clones(corpus, min_length)?;
    let ratio = cloning_ratio(&classes, corpus);
    Ok((
        CloneReport {
            min_length,
            classes,
            cloned_lines: ratio.cloned_lines,
            total_sloc: ratio.total_sloc,
            ratio: ratio.ratio,
        },
        ratio.warnings,
    ))
}

impl CloneReport {
    /// Machine-readable listing: one occurrence per line,
    /// `path<TAB>start-line<TAB>end-line<TAB>class-id`, class ids 1-based.
    pub fn listing(&self) -> String {
        let mut out = String::new();
        for (i, class) in self.classes.iter().enumerate() {
            for occ in &class.occurrences {
                let _ = writeln!(out, "{}\t{}\t{}\t{}", occ.path, occ.start_line, occ.end_line, i + 1);
            }
        }
        out
    }

    pub fn file_ratio(&self, path: &str, sloc: usize) -> f64 {
        let cloned = self.cloned_lines.get(path).map_or(0, BTreeSet::len);
        cloned as f64 / sloc.max(1) as f64
    }
}
