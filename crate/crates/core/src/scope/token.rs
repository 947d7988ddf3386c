//! Profile-driven lexer producing token streams with comment-line info.

use std::fmt;

use super::profile::LanguageProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TokenKind {
    Identifier,
    Keyword,
    Literal,
    Operator,
    Punctuation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// 1-based line of the first character.
    pub line: u32,
    /// 1-based line of the last character (differs for multi-line literals).
    pub end_line: u32,
}

impl Token {
    /// Identifiers collapse to `ID`, literals to `LIT`; everything else is kept.
    pub fn normalized(&self) -> &str {
        match self.kind {
            TokenKind::Identifier => "ID",
            TokenKind::Literal => "LIT",
            _ => &self.text,
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.kind {
            TokenKind::Identifier => "ID",
            TokenKind::Keyword => "KEYWORD",
            TokenKind::Literal => "LIT",
            TokenKind::Operator => "OP",
            TokenKind::Punctuation => "PUNCT",
        };
        write!(f, "{tag}({})", self.text)
    }
}

/// Tokens of one file plus the lines touched by comments.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenStream {
    pub tokens: Vec<Token>,
    /// Sorted, deduplicated 1-based lines intersecting a comment.
    pub comment_lines: Vec<u32>,
    pub warnings: Vec<String>,
}

impl TokenStream {
    /// Sorted, deduplicated lines covered by at least one token.
    pub fn code_lines(&self) -> Vec<u32> {
        let mut lines: Vec<u32> = Vec::new();
        for t in &self.tokens {
            for l in t.line..=t.end_line {
                if lines.last().is_none_or(|&last| last < l) {
                    lines.push(l);
                }
            }
        }
        lines
    }
}

const OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", "...", "===", "!==", "**=", ">>>", "<=>", "->", "=>", "==", "!=", "<=",
    ">=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>",
    "::", "**", "??", "?.", "+", "-", "*", "/", "%", "=", "<", ">", "!", "&", "|", "^", "~", "?",
    ":",
];

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '$'
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    profile: &'a LanguageProfile,
    out: TokenStream,
}

impl Lexer<'_> {
    fn starts_with(&self, s: &str) -> bool {
        let mut i = self.pos;
        for c in s.chars() {
            if self.chars.get(i) != Some(&c) {
                return false;
            }
            i += 1;
        }
        true
    }

    /// Advances one char, tracking lines.
    fn bump(&mut self) -> char {
        let c = self.chars[self.pos];
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
        }
        c
    }

    fn mark_comment(&mut self, from: u32, to: u32) {
        for l in from..=to {
            if self.out.comment_lines.last().is_none_or(|&last| last < l) {
                self.out.comment_lines.push(l);
            }
        }
    }

    fn push(&mut self, kind: TokenKind, start: usize, line: u32) {
        let text: String = self.chars[start..self.pos].iter().collect();
        self.out.tokens.push(Token {
            kind,
            text,
            line,
            end_line: self.line,
        });
    }

    fn run(mut self) -> TokenStream {
        let profile = self.profile;
        while self.pos < self.chars.len() {
            let c = self.chars[self.pos];
            let start = self.pos;
            let line = self.line;
            if c.is_whitespace() {
                self.bump();
                continue;
            }
            if let Some(prefix) = profile.line_comment.as_deref() {
                if self.starts_with(prefix) {
                    while self.pos < self.chars.len() && self.chars[self.pos] != '\n' {
                        self.pos += 1;
                    }
                    self.mark_comment(line, line);
                    continue;
                }
            }
            if let Some((open, close)) = profile.block_comment.as_ref() {
                if self.starts_with(open) {
                    for _ in open.chars() {
                        self.bump();
                    }
                    loop {
                        if self.pos >= self.chars.len() {
                            self.out.warnings.push(format!(
                                "unterminated comment starting at line {line}; closed at end of file"
                            ));
                            break;
                        }
                        if self.starts_with(close) {
                            for _ in close.chars() {
                                self.bump();
                            }
                            break;
                        }
                        self.bump();
                    }
                    let end = self.line;
                    self.mark_comment(line, end);
                    continue;
                }
            }
            if profile.string_delimiters.contains(&c) {
                self.bump();
                loop {
                    if self.pos >= self.chars.len() {
                        self.out.warnings.push(format!(
                            "unterminated string starting at line {line}; closed at end of file"
                        ));
                        break;
                    }
                    let d = self.bump();
                    if d == '\\' {
                        if self.pos < self.chars.len() {
                            self.bump();
                        }
                    } else if d == c {
                        break;
                    }
                }
                self.push(TokenKind::Literal, start, line);
                continue;
            }
            if is_ident_start(c) {
                while self.pos < self.chars.len() && is_ident_char(self.chars[self.pos]) {
                    self.pos += 1;
                }
                let word: String = self.chars[start..self.pos].iter().collect();
                let kind = if profile.is_keyword(&word) {
                    TokenKind::Keyword
                } else {
                    TokenKind::Identifier
                };
                self.out.tokens.push(Token {
                    kind,
                    text: word,
                    line,
                    end_line: line,
                });
                continue;
            }
            if c.is_ascii_digit() {
                self.lex_number();
                self.push(TokenKind::Literal, start, line);
                continue;
            }
            if let Some(op) = OPERATORS.iter().find(|op| self.starts_with(op)) {
                self.pos += op.len();
                self.push(TokenKind::Operator, start, line);
                continue;
            }
            self.bump();
            self.push(TokenKind::Punctuation, start, line);
        }
        self.out
    }

    fn lex_number(&mut self) {
        let hex = self.starts_with("0x") || self.starts_with("0X");
        self.pos += 1;
        while let Some(&c) = self.chars.get(self.pos) {
            let prev = self.chars[self.pos - 1];
            let next_digit = self
                .chars
                .get(self.pos + 1)
                .is_some_and(|d| d.is_ascii_digit());
            let take = c.is_ascii_alphanumeric()
                || c == '_'
                || (c == '.' && next_digit)
                || ((c == '+' || c == '-') && !hex && matches!(prev, 'e' | 'E') && next_digit);
            if !take {
                break;
            }
            self.pos += 1;
        }
    }
}

/// Splits `content` into tokens. Whitespace and comments are dropped; every
/// other character belongs to exactly one token. Never fails: unterminated
/// strings and comments are closed at end of input with a warning.
pub fn tokenize(content: &str, profile: &LanguageProfile) -> TokenStream {
    Lexer {
        chars: content.chars().collect(),
        pos: 0,
        line: 1,
        profile,
        out: TokenStream::default(),
    }
    .run()
}
