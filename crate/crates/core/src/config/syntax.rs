//! Line-oriented key-value text format shared by pipeline configs,
//! language-profile files and architecture specs.
//!
//! A document is a sequence of directive lines (`<keyword> <header...>`)
//! each optionally followed by indented `<name> = <value>` lines. `#` starts
//! a comment outside of string literals.

use std::collections::BTreeMap;
use std::fmt;

use super::ConfigError;

/// `@<producer-id>.<port>`
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Reference {
    pub producer: String,
    pub port: String,
}

impl fmt::Display for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "@{}.{}", self.producer, self.port)
    }
}

/// A parameter value as written in the source.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
    StrList(Vec<String>),
    Ref(Reference),
    /// A bare word. Inside a block body it names a formal parameter.
    Word(String),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Str(_) => "string",
            Value::Int(_) => "integer",
            Value::Float(_) => "float",
            Value::Bool(_) => "boolean",
            Value::StrList(_) => "string-list",
            Value::Ref(_) => "reference",
            Value::Word(_) => "word",
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[String]> {
        match self {
            Value::StrList(l) => Some(l),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    /// Integers are accepted where a float is expected.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Float(f) => Some(*f),
            Value::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => write_quoted(f, s),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => {
                if x.fract() == 0.0 && x.is_finite() {
                    write!(f, "{x:.1}")
                } else {
                    write!(f, "{x}")
                }
            }
            Value::Bool(b) => write!(f, "{b}"),
            Value::StrList(items) => {
                f.write_str("[")?;
                for (i, s) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write_quoted(f, s)?;
                }
                f.write_str("]")
            }
            Value::Ref(r) => write!(f, "{r}"),
            Value::Word(w) => f.write_str(w),
        }
    }
}

fn write_quoted(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

/// A value with the position it was written at.
#[derive(Debug, Clone, PartialEq)]
pub struct Spanned<T> {
    pub value: T,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Word(String),
    Str(String),
    Int(i64),
    Float(f64),
    Ref(Reference),
    Punct(&'static str),
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Str(_) => "string literal".into(),
            Tok::Int(_) | Tok::Float(_) => "number".into(),
            Tok::Ref(r) => format!("reference `{r}`"),
            Tok::Punct(p) => format!("`{p}`"),
        }
    }
}

/// A lexed line: tokens with 1-based columns.
#[derive(Debug, Clone)]
pub struct LineTokens {
    pub line: usize,
    pub indented: bool,
    pub toks: Vec<(Tok, usize)>,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn is_word_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

/// Lexes one line. Returns `None` for blank and comment-only lines.
pub fn lex_line(text: &str, line: usize) -> Result<Option<LineTokens>, ConfigError> {
    let chars: Vec<char> = text.chars().collect();
    let indented = chars.first().is_some_and(|c| c.is_whitespace());
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            break;
        }
        if c == '"' {
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err(syntax(line, col, "unterminated string literal")),
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some('\\') => {
                        let esc = match chars.get(i + 1) {
                            Some('"') => '"',
                            Some('\\') => '\\',
                            Some('n') => '\n',
                            Some('t') => '\t',
                            _ => return Err(syntax(line, i + 1, "invalid escape sequence")),
                        };
                        s.push(esc);
                        i += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            toks.push((Tok::Str(s), col));
            continue;
        }
        if c == '@' {
            let start = i + 1;
            let mut j = start;
            while j < chars.len() && (is_word_char(chars[j]) || chars[j] == '.') {
                j += 1;
            }
            let body: String = chars[start..j].iter().collect();
            let reference = parse_reference(&body)
                .ok_or_else(|| syntax(line, col, format!("malformed reference `@{body}`")))?;
            toks.push((Tok::Ref(reference), col));
            i = j;
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let mut j = i + 1;
            while j < chars.len()
                && (chars[j].is_ascii_alphanumeric()
                    || chars[j] == '.'
                    || ((chars[j] == '-' || chars[j] == '+')
                        && matches!(chars[j - 1], 'e' | 'E')))
            {
                j += 1;
            }
            let lit: String = chars[i..j].iter().collect();
            let tok = if let Ok(v) = lit.parse::<i64>() {
                Tok::Int(v)
            } else if let Ok(v) = lit.parse::<f64>() {
                if !v.is_finite() {
                    return Err(syntax(line, col, format!("non-finite number `{lit}`")));
                }
                Tok::Float(v)
            } else {
                return Err(syntax(line, col, format!("malformed number `{lit}`")));
            };
            toks.push((tok, col));
            i = j;
            continue;
        }
        if is_word_start(c) {
            let mut j = i + 1;
            while j < chars.len() && (is_word_char(chars[j]) || chars[j] == '.') {
                j += 1;
            }
            toks.push((Tok::Word(chars[i..j].iter().collect()), col));
            i = j;
            continue;
        }
        let punct = match c {
            '-' if chars.get(i + 1) == Some(&'>') => "->",
            ':' => ":",
            '=' => "=",
            '(' => "(",
            ')' => ")",
            '[' => "[",
            ']' => "]",
            ',' => ",",
            _ => return Err(syntax(line, col, format!("unexpected character `{c}`"))),
        };
        i += punct.len();
        toks.push((Tok::Punct(punct), col));
    }
    if toks.is_empty() {
        return Ok(None);
    }
    Ok(Some(LineTokens {
        line,
        indented,
        toks,
    }))
}

pub fn parse_reference(body: &str) -> Option<Reference> {
    let (producer, port) = body.rsplit_once('.')?;
    let valid = |s: &str| {
        !s.is_empty()
            && s.split('.').all(|seg| {
                let mut cs = seg.chars();
                cs.next().is_some_and(is_word_start) && cs.all(is_word_char)
            })
    };
    if !valid(producer) || !valid(port) || port.contains('.') {
        return None;
    }
    Some(Reference {
        producer: producer.to_string(),
        port: port.to_string(),
    })
}

/// Cursor over the tokens of one line.
pub struct Cursor<'a> {
    line: usize,
    toks: &'a [(Tok, usize)],
    pos: usize,
    end_col: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(lt: &'a LineTokens) -> Self {
        let end_col = lt.toks.last().map(|(_, c)| c + 1).unwrap_or(1);
        Cursor {
            line: lt.line,
            toks: &lt.toks,
            pos: 0,
            end_col,
        }
    }

    pub fn line(&self) -> usize {
        self.line
    }

    pub fn column(&self) -> usize {
        self.toks.get(self.pos).map(|(_, c)| *c).unwrap_or(self.end_col)
    }

    pub fn error(&self, message: impl Into<String>) -> ConfigError {
        syntax(self.line, self.column(), message)
    }

    pub fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn next(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn found(&self) -> String {
        self.peek()
            .map(Tok::describe)
            .unwrap_or_else(|| "end of line".into())
    }

    pub fn expect_word(&mut self, what: &str) -> Result<String, ConfigError> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => Err(self.error(format!("expected {what}, found {}", self.found()))),
        }
    }

    /// A plain identifier: a word without dots.
    pub fn expect_ident(&mut self, what: &str) -> Result<String, ConfigError> {
        let col = self.column();
        let w = self.expect_word(what)?;
        if w.contains('.') {
            return Err(syntax(self.line, col, format!("{what} `{w}` must not contain `.`")));
        }
        Ok(w)
    }

    pub fn expect_punct(&mut self, p: &'static str) -> Result<(), ConfigError> {
        match self.peek() {
            Some(Tok::Punct(q)) if *q == p => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(format!("expected `{p}`, found {}", self.found()))),
        }
    }

    pub fn eat_punct(&mut self, p: &'static str) -> bool {
        if matches!(self.peek(), Some(Tok::Punct(q)) if *q == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect_end(&self) -> Result<(), ConfigError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error(format!("unexpected {}", self.found())))
        }
    }

    pub fn value(&mut self) -> Result<Spanned<Value>, ConfigError> {
        let (line, column) = (self.line, self.column());
        let value = match self.next().cloned() {
            Some(Tok::Str(s)) => Value::Str(s),
            Some(Tok::Int(i)) => Value::Int(i),
            Some(Tok::Float(f)) => Value::Float(f),
            Some(Tok::Ref(r)) => Value::Ref(r),
            Some(Tok::Word(w)) if w == "true" => Value::Bool(true),
            Some(Tok::Word(w)) if w == "false" => Value::Bool(false),
            Some(Tok::Word(w)) => Value::Word(w),
            Some(Tok::Punct("[")) => {
                let mut items = Vec::new();
                if !self.eat_punct("]") {
                    loop {
                        match self.next().cloned() {
                            Some(Tok::Str(s)) => items.push(s),
                            _ => {
                                self.pos -= 1;
                                return Err(
                                    self.error("list elements must be string literals")
                                );
                            }
                        }
                        if self.eat_punct("]") {
                            break;
                        }
                        self.expect_punct(",")?;
                    }
                }
                Value::StrList(items)
            }
            _ => return Err(syntax(line, column, "expected a value")),
        };
        Ok(Spanned {
            value,
            line,
            column,
        })
    }
}

/// One directive with its indented parameter lines.
#[derive(Debug, Clone)]
pub struct Section {
    pub header: LineTokens,
    pub params: BTreeMap<String, Spanned<Value>>,
}

impl Section {
    pub fn keyword(&self) -> &str {
        match self.header.toks.first() {
            Some((Tok::Word(w), _)) => w,
            _ => "",
        }
    }

    pub fn line(&self) -> usize {
        self.header.line
    }
}

/// Splits a document into directive sections. Indented `name = value` lines
/// attach to the preceding directive.
pub fn parse_sections(text: &str) -> Result<Vec<Section>, ConfigError> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let Some(lt) = lex_line(raw, line_no)? else {
            continue;
        };
        let is_param = lt.indented
            && matches!(lt.toks.first(), Some((Tok::Word(_), _)))
            && matches!(lt.toks.get(1), Some((Tok::Punct("="), _)));
        if is_param {
            let Some(section) = sections.last_mut() else {
                return Err(syntax(line_no, 1, "parameter line outside of any section"));
            };
            let mut cur = Cursor::new(&lt);
            let name_col = cur.column();
            let name = cur.expect_ident("parameter name")?;
            cur.expect_punct("=")?;
            let value = cur.value()?;
            cur.expect_end()?;
            if section.params.contains_key(&name) {
                return Err(syntax(
                    line_no,
                    name_col,
                    format!("parameter `{name}` given twice"),
                ));
            }
            section.params.insert(name, value);
            continue;
        }
        match lt.toks.first() {
            Some((Tok::Word(_), _)) => sections.push(Section {
                header: lt,
                params: BTreeMap::new(),
            }),
            Some((t, col)) => {
                return Err(syntax(line_no, *col, format!("expected a directive, found {}", t.describe())))
            }
            None => unreachable!("blank lines are skipped"),
        }
    }
    Ok(sections)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(line: &str) -> Value {
        let lt = lex_line(line, 1).unwrap().unwrap();
        let mut c = Cursor::new(&lt);
        let v = c.value().unwrap().value;
        c.expect_end().unwrap();
        v
    }

    #[test]
    fn value_grammar() {
        assert_eq!(one("\"a b\""), Value::Str("a b".into()));
        assert_eq!(one("\"q\\\"x\\\\\""), Value::Str("q\"x\\".into()));
        assert_eq!(one("42"), Value::Int(42));
        assert_eq!(one("-3"), Value::Int(-3));
        assert_eq!(one("2.5"), Value::Float(2.5));
        assert_eq!(one("1e-3"), Value::Float(0.001));
        assert_eq!(one("true"), Value::Bool(true));
        assert_eq!(one("[]"), Value::StrList(vec![]));
        assert_eq!(
            one("[\"a\", \"b\"]"),
            Value::StrList(vec!["a".into(), "b".into()])
        );
        assert_eq!(
            one("@b1.x.tree"),
            Value::Ref(Reference {
                producer: "b1.x".into(),
                port: "tree".into()
            })
        );
        assert_eq!(one("input"), Value::Word("input".into()));
    }

    #[test]
    fn comments_and_errors() {
        assert!(lex_line("   # only a comment", 1).unwrap().is_none());
        let lt = lex_line("x = \"#not\" # tail", 1).unwrap().unwrap();
        assert_eq!(lt.toks.len(), 3);
        let err = lex_line("x = \"open", 7).unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 7, column: 5, .. }));
        assert!(lex_line("x = @nodot", 1).is_err());
        assert!(lex_line("x = $", 1).is_err());
    }

    #[test]
    fn display_round_trips() {
        for v in [
            Value::Str("a\"b\\c\n".into()),
            Value::Float(3.0),
            Value::Float(0.25),
            Value::StrList(vec!["x".into(), "y z".into()]),
        ] {
            assert_eq!(one(&v.to_string()), v);
        }
    }

    #[test]
    fn sections_collect_params() {
        let doc = "component core\n  match = [\"src/**\"]\nallow a -> b\n";
        let secs = parse_sections(doc).unwrap();
        assert_eq!(secs.len(), 2);
        assert_eq!(secs[0].keyword(), "component");
        assert!(secs[0].params.contains_key("match"));
        assert_eq!(secs[1].header.toks.len(), 4);
        assert!(parse_sections("  x = 1\n").is_err());
        assert!(parse_sections("a\n  x = 1\n  x = 2\n").is_err());
    }
}
