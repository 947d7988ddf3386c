//! Minimal path glob dialect: `*` and `?` match within one path segment,
//! `**` matches zero or more whole segments. Paths are relative and
//! `/`-separated; the empty path denotes the project root.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    /// `**`
    Any,
    /// A segment pattern made of literal characters, `*` and `?`.
    Pattern(Vec<Piece>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Literal(char),
    Star,
    Question,
}

/// A compiled glob pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Glob {
    source: String,
    segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid glob `{pattern}`: {reason}")]
pub struct GlobError {
    pub pattern: String,
    pub reason: String,
}

impl Glob {
    pub fn new(pattern: &str) -> Result<Self, GlobError> {
        let err = |reason: &str| GlobError {
            pattern: pattern.to_string(),
            reason: reason.to_string(),
        };
        if pattern.is_empty() {
            return Err(err("empty pattern"));
        }
        if pattern.starts_with('/') {
            return Err(err("patterns are relative to the project root"));
        }
        let mut segments = Vec::new();
        for raw in pattern.split('/') {
            if raw.is_empty() {
                return Err(err("empty path segment"));
            }
            if raw == "**" {
                // Collapse consecutive `**`.
                if segments.last() != Some(&Segment::Any) {
                    segments.push(Segment::Any);
                }
                continue;
            }
            if raw.contains("**") {
                return Err(err("`**` must form a whole segment"));
            }
            let pieces = raw
                .chars()
                .map(|c| match c {
                    '*' => Piece::Star,
                    '?' => Piece::Question,
                    c => Piece::Literal(c),
                })
                .collect();
            segments.push(Segment::Pattern(pieces));
        }
        Ok(Glob {
            source: pattern.to_string(),
            segments,
        })
    }

    pub fn as_str(&self) -> &str {
        &self.source
    }

    /// Matches a relative `/`-separated path. The empty string is the root.
    pub fn is_match(&self, path: &str) -> bool {
        let parts: Vec<&str> = if path.is_empty() {
            Vec::new()
        } else {
            path.split('/').collect()
        };
        match_segments(&self.segments, &parts)
    }
}

impl fmt::Display for Glob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

fn match_segments(pattern: &[Segment], path: &[&str]) -> bool {
    // memo[i][j]: pattern[i..] matches path[j..]
    let (np, nq) = (pattern.len(), path.len());
    let mut memo = vec![vec![false; nq + 1]; np + 1];
    memo[np][nq] = true;
    for i in (0..np).rev() {
        for j in (0..=nq).rev() {
            memo[i][j] = match &pattern[i] {
                Segment::Any => memo[i + 1][j] || (j < nq && memo[i][j + 1]),
                Segment::Pattern(pieces) => {
                    j < nq && match_pieces(pieces, path[j]) && memo[i + 1][j + 1]
                }
            };
        }
    }
    memo[0][0]
}

fn match_pieces(pieces: &[Piece], text: &str) -> bool {
    let chars: Vec<char> = text.chars().collect();
    let (np, nt) = (pieces.len(), chars.len());
    let mut memo = vec![vec![false; nt + 1]; np + 1];
    memo[np][nt] = true;
    for i in (0..np).rev() {
        for j in (0..=nt).rev() {
            memo[i][j] = match pieces[i] {
                Piece::Star => memo[i + 1][j] || (j < nt && memo[i][j + 1]),
                Piece::Question => j < nt && memo[i + 1][j + 1],
                Piece::Literal(c) => j < nt && chars[j] == c && memo[i + 1][j + 1],
            };
        }
    }
    memo[0][0]
}

/// An include/exclude filter. Exclusion wins over inclusion; an empty
/// include list behaves like `**/*`.
#[derive(Debug, Clone, Default)]
pub struct PathFilter {
    include: Vec<Glob>,
    exclude: Vec<Glob>,
}

impl PathFilter {
    pub fn new<I, E, S, T>(include: I, exclude: E) -> Result<Self, GlobError>
    where
        I: IntoIterator<Item = S>,
        E: IntoIterator<Item = T>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let include = include
            .into_iter()
            .map(|p| Glob::new(p.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        let exclude = exclude
            .into_iter()
            .map(|p| Glob::new(p.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PathFilter { include, exclude })
    }

    pub fn accepts(&self, path: &str) -> bool {
        if self.exclude.iter().any(|g| g.is_match(path)) {
            return false;
        }
        self.include.is_empty() || self.include.iter().any(|g| g.is_match(path))
    }
}
