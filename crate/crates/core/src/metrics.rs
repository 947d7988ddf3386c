//! Size and structure sensors computed per file.

use std::collections::BTreeSet;

use crate::scope::{LanguageProfile, Token, TokenKind, TokenStream};

pub const LOC: &str = "loc";
pub const SLOC: &str = "sloc";
pub const COMMENT_RATIO: &str = "comment.ratio";
pub const PROC_COUNT: &str = "proc.count";
pub const PROC_AVG_LENGTH: &str = "proc.avg_length";
pub const NESTING_MAX: &str = "nesting.max";
pub const CONDITION_RATIO: &str = "condition.ratio";
pub const CYCLOMATIC: &str = "cyclomatic";

/// Every per-file metric id produced by this module.
pub const METRIC_IDS: &[&str] = &[
    LOC,
    SLOC,
    COMMENT_RATIO,
    PROC_COUNT,
    PROC_AVG_LENGTH,
    NESTING_MAX,
    CONDITION_RATIO,
    CYCLOMATIC,
];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SizeMetrics {
    pub loc: usize,
    pub sloc: usize,
    pub comment_lines: usize,
    pub comment_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StructureMetrics {
    pub procedure_count: usize,
    pub average_procedure_length: f64,
    pub max_nesting: usize,
    pub branch_count: usize,
    pub condition_ratio: f64,
    pub cyclomatic: usize,
    pub warnings: Vec<String>,
}

/// Physical lines: newline-separated, a final partial line counts.
pub fn physical_lines(content: &str) -> usize {
    content.lines().count()
}

pub fn compute_size_metrics(content: &str, stream: &TokenStream) -> SizeMetrics {
    let loc = physical_lines(content);
    let code: BTreeSet<u32> = stream.code_lines().into_iter().collect();
    let comment_lines = stream
        .comment_lines
        .iter()
        .filter(|l| !code.contains(l))
        .count();
    SizeMetrics {
        loc,
        sloc: code.len(),
        comment_lines,
        comment_ratio: comment_lines as f64 / loc.max(1) as f64,
    }
}

fn is_branch(t: &Token, profile: &LanguageProfile) -> bool {
    t.kind == TokenKind::Keyword && profile.branch_keywords.contains(&t.text)
}

fn is_loop(t: &Token, profile: &LanguageProfile) -> bool {
    t.kind == TokenKind::Keyword && profile.loop_keywords.contains(&t.text)
}

fn is_open(t: &Token, profile: &LanguageProfile) -> bool {
    t.kind != TokenKind::Literal && profile.block_open.contains(&t.text)
}

fn is_close(t: &Token, profile: &LanguageProfile) -> bool {
    t.kind != TokenKind::Literal && profile.block_close.contains(&t.text)
}

fn is_terminator(t: &Token, profile: &LanguageProfile) -> bool {
    t.kind != TokenKind::Literal && profile.terminator.as_deref() == Some(t.text.as_str())
}

pub fn compute_structure_metrics(stream: &TokenStream, profile: &LanguageProfile) -> StructureMetrics {
    let tokens = &stream.tokens;
    let sloc = stream.code_lines().len();
    let branch_count = tokens.iter().filter(|t| is_branch(t, profile)).count();
    let (max_nesting, mut warnings) = loop_nesting(tokens, profile);
    let procedures = find_procedures(tokens, profile);
    let total_len: usize = procedures
        .iter()
        .map(|&(s, e)| {
            let mut lines = BTreeSet::new();
            for t in &tokens[s..=e] {
                lines.extend(t.line..=t.end_line);
            }
            lines.len()
        })
        .sum();
    let procedure_count = procedures.len();
    let average_procedure_length = if procedure_count == 0 {
        0.0
    } else {
        total_len as f64 / procedure_count as f64
    };
    warnings.dedup();
    StructureMetrics {
        procedure_count,
        average_procedure_length,
        max_nesting,
        branch_count,
        condition_ratio: branch_count as f64 / sloc.max(1) as f64,
        cyclomatic: 1 + branch_count,
        warnings,
    }
}

/// Maximum number of simultaneously open loop bodies. Brace-less loop
/// bodies stay pending until a block opens or a statement terminator
/// outside parentheses closes them.
fn loop_nesting(tokens: &[Token], profile: &LanguageProfile) -> (usize, Vec<String>) {
    let mut stack: Vec<usize> = Vec::new();
    let mut open_loops = 0usize;
    let mut pending = 0usize;
    let mut parens = 0usize;
    let mut max = 0usize;
    let mut warnings = Vec::new();
    for t in tokens {
        if is_loop(t, profile) {
            pending += 1;
            max = max.max(open_loops + pending);
        } else if is_open(t, profile) {
            stack.push(pending);
            open_loops += pending;
            pending = 0;
        } else if is_close(t, profile) {
            match stack.pop() {
                Some(n) => open_loops -= n,
                None => warnings.push(format!(
                    "unmatched `{}` at line {}; nesting depth clamped at 0",
                    t.text, t.line
                )),
            }
            pending = 0;
        } else if t.kind == TokenKind::Punctuation && t.text == "(" {
            parens += 1;
        } else if t.kind == TokenKind::Punctuation && t.text == ")" {
            parens = parens.saturating_sub(1);
        } else if parens == 0 && is_terminator(t, profile) {
            pending = 0;
        }
    }
    (max, warnings)
}

/// Index of the block close matching the block open at `open`, or the last
/// token when the block never closes.
fn matching_close(tokens: &[Token], open: usize, profile: &LanguageProfile) -> usize {
    let mut depth = 0usize;
    for (i, t) in tokens.iter().enumerate().skip(open) {
        if is_open(t, profile) {
            depth += 1;
        } else if is_close(t, profile) {
            depth -= 1;
            if depth == 0 {
                return i;
            }
        }
    }
    tokens.len() - 1
}

fn is_punct(t: &Token, text: &str) -> bool {
    t.kind == TokenKind::Punctuation && t.text == text
}

/// `name ( ... ) [qualifiers] {` at token `i`; returns the index of `{`.
fn call_style_body(tokens: &[Token], i: usize, profile: &LanguageProfile) -> Option<usize> {
    const MAX_QUALIFIERS: usize = 12;
    if tokens[i].kind != TokenKind::Identifier || !tokens.get(i + 1).is_some_and(|t| is_punct(t, "(")) {
        return None;
    }
    if i > 0 && tokens[i - 1].kind == TokenKind::Keyword && tokens[i - 1].text == "new" {
        return None;
    }
    let mut depth = 0usize;
    let mut j = i + 1;
    loop {
        let t = tokens.get(j)?;
        if is_punct(t, "(") {
            depth += 1;
        } else if is_punct(t, ")") {
            depth -= 1;
            if depth == 0 {
                break;
            }
        } else if is_open(t, profile) || is_close(t, profile) || is_terminator(t, profile) {
            return None;
        }
        j += 1;
    }
    for (k, t) in tokens.iter().enumerate().skip(j + 1).take(MAX_QUALIFIERS) {
        if is_open(t, profile) {
            return Some(k);
        }
        let allowed = match t.kind {
            TokenKind::Identifier => true,
            TokenKind::Keyword => {
                !profile.branch_keywords.contains(&t.text) && !profile.loop_keywords.contains(&t.text)
            }
            TokenKind::Punctuation => matches!(t.text.as_str(), "," | "." | "[" | "]"),
            TokenKind::Operator => matches!(t.text.as_str(), "::" | "->" | "<" | ">" | "&" | "*"),
            TokenKind::Literal => false,
        };
        if !allowed {
            return None;
        }
    }
    None
}

/// Heuristic procedure spans as inclusive token index ranges. Procedures do
/// not nest: tokens inside a detected body are skipped.
fn find_procedures(tokens: &[Token], profile: &LanguageProfile) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        if t.kind == TokenKind::Keyword && profile.procedure_keywords.contains(&t.text) {
            let mut parens = 0usize;
            let mut end = None;
            let mut declaration_only = false;
            for (j, u) in tokens.iter().enumerate().skip(i + 1) {
                if is_punct(u, "(") {
                    parens += 1;
                } else if is_punct(u, ")") {
                    parens = parens.saturating_sub(1);
                } else if is_open(u, profile) {
                    end = Some(matching_close(tokens, j, profile));
                    break;
                } else if parens == 0 && is_terminator(u, profile) {
                    declaration_only = true;
                    break;
                } else if u.kind == TokenKind::Keyword && profile.procedure_keywords.contains(&u.text) {
                    end = Some(j - 1);
                    break;
                }
            }
            if declaration_only {
                i += 1;
                continue;
            }
            let end = end.unwrap_or(tokens.len() - 1);
            out.push((i, end));
            i = end + 1;
            continue;
        }
        if profile.procedure_calls {
            if let Some(open) = call_style_body(tokens, i, profile) {
                let end = matching_close(tokens, open, profile);
                out.push((i, end));
                i = end + 1;
                continue;
            }
        }
        i += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scope::{tokenize, ProfileSet};

    fn c_like() -> LanguageProfile {
        ProfileSet::builtin().get("c-like").unwrap().clone()
    }

    fn structure(src: &str) -> StructureMetrics {
        let p = c_like();
        compute_structure_metrics(&tokenize(src, &p), &p)
    }

    #[test]
    fn size_of_empty_and_mixed_content() {
        let p = c_like();
        let m = compute_size_metrics("", &tokenize("", &p));
        assert_eq!((m.loc, m.sloc, m.comment_lines, m.comment_ratio), (0, 0, 0, 0.0));
        let src = "int x = 1;\n\n// note\n";
        let m = compute_size_metrics(src, &tokenize(src, &p));
        assert_eq!((m.loc, m.sloc, m.comment_lines), (3, 1, 1));
        assert_eq!(m.comment_ratio, 1.0 / 3.0);
        let src = "a; // trailing\n/*\n\n*/ b;";
        let m = compute_size_metrics(src, &tokenize(src, &p));
        assert_eq!((m.loc, m.sloc, m.comment_lines), (4, 2, 2));
    }

    #[test]
    fn cyclomatic_counts_branch_keywords() {
        let m = structure("x = y + 1;");
        assert_eq!((m.cyclomatic, m.max_nesting, m.condition_ratio), (1, 0, 0.0));
        let m = structure("if (a) {} if (b) {} if (c) {} while (d) {}");
        assert_eq!(m.cyclomatic, 5);
        assert_eq!(m.condition_ratio, 4.0);
    }

    #[test]
    fn loop_nesting_depth() {
        assert_eq!(structure("while { while { } }").max_nesting, 2);
        assert_eq!(structure("while (a) { } while (b) { }").max_nesting, 1);
        assert_eq!(structure("for (i=0;i<n;i++) for (;;) x();").max_nesting, 2);
        assert_eq!(structure("for (;;) x(); for (;;) y();").max_nesting, 1);
        assert_eq!(structure("do { while (a) { } } while (b);").max_nesting, 2);
        assert_eq!(structure("if (a) { while (b) { if (c) { for (;;) {} } } }").max_nesting, 2);
        let m = structure("} } while (a) {}");
        assert_eq!(m.max_nesting, 1);
        assert_eq!(m.warnings.len(), 1);
    }

    #[test]
    fn procedures_call_style() {
        let src = "class A {\n  int f(int x) {\n    return x;\n  }\n  void g() throws E {\n    if (a) { b(); }\n    c();\n  }\n  abstract void h();\n}\n";
        let m = structure(src);
        assert_eq!(m.procedure_count, 2);
        assert_eq!(m.average_procedure_length, 3.5);
        let none = structure("x = new Foo() { };");
        assert_eq!(none.procedure_count, 0);
        assert_eq!(none.average_procedure_length, 0.0);
    }

    #[test]
    fn procedures_keyword_style() {
        let set = ProfileSet::builtin();
        let p = set.get("script-like").unwrap();
        let src = "def a(x):\n    return x\n\ndef b():\n    pass\n    pass\n";
        let m = compute_structure_metrics(&tokenize(src, p), p);
        assert_eq!(m.procedure_count, 2);
        assert_eq!(m.average_procedure_length, 2.5);
        let src = "function f {\n  echo 1\n}\nfor x in y; do\n  for z in w; do\n    echo\n  done\ndone\n";
        let m = compute_structure_metrics(&tokenize(src, p), p);
        assert_eq!(m.procedure_count, 1);
        assert_eq!(m.max_nesting, 2);
    }
}
