//! SPARQL tokenizer.
//!
//! Conventions: whitespace and comments are dropped, no end-of-input token
//! is emitted, bare words are keywords (upper-cased in `value`, except the
//! case-sensitive `a`), and `%name` yields a [`TokenKind::NamedSet`] token
//! used only by the extended dialect.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    /// `<...>`; `value` holds the unescaped IRI text.
    Iri,
    /// `prefix:local`; `value` holds the lexeme.
    PrefixedName,
    /// `?x` or `$x`; `value` holds the name without sigil.
    Variable,
    /// `_:label`; `value` holds the label.
    BlankNode,
    /// Quoted string; `value` holds the unescaped content.
    String,
    /// `@en`; `value` holds the tag.
    LangTag,
    Number,
    Keyword,
    Punctuation,
    /// Operators usable in property paths: `/ | ^ * + ? !`.
    PathOperator,
    /// `%name` named-subquery reference; `value` holds the name.
    NamedSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub value: String,
    pub line: usize,
    pub column: usize,
    /// Byte offsets into the source text.
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn is_keyword(&self, keyword: &str) -> bool {
        self.kind == TokenKind::Keyword && self.value.eq_ignore_ascii_case(keyword)
    }

    pub fn is_punct(&self, punct: &str) -> bool {
        matches!(self.kind, TokenKind::Punctuation | TokenKind::PathOperator) && self.lexeme == punct
    }

    /// Prefix label of a prefixed name (empty for `:local`).
    pub fn prefix_label(&self) -> Option<&str> {
        (self.kind == TokenKind::PrefixedName)
            .then(|| self.lexeme.split_once(':').map_or("", |(p, _)| p))
    }

    pub fn local_name(&self) -> Option<&str> {
        (self.kind == TokenKind::PrefixedName)
            .then(|| self.lexeme.split_once(':').map_or("", |(_, l)| l))
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "'{}'", self.lexeme)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message} at {line}:{column}")]
pub struct TokenizeError {
    pub message: String,
    pub line: usize,
    pub column: usize,
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, TokenizeError> {
    Lexer::new(text).run()
}

struct Lexer<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
    line_start: usize,
    tokens: Vec<Token>,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            text,
            pos: 0,
            line: 1,
            line_start: 0,
            tokens: Vec::new(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek_nth(&self, n: usize) -> Option<char> {
        self.rest().chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.line_start = self.pos;
        }
        Some(c)
    }

    fn column_at(&self, start: usize) -> usize {
        // start is always on the current line when tokens are pushed
        self.text[self.line_start.min(start)..start].chars().count() + 1
    }

    fn error<T>(&self, message: impl Into<String>, line: usize, column: usize) -> Result<T, TokenizeError> {
        Err(TokenizeError {
            message: message.into(),
            line,
            column,
        })
    }

    fn run(mut self) -> Result<Vec<Token>, TokenizeError> {
        loop {
            self.skip_trivia();
            let Some(c) = self.peek() else {
                return Ok(self.tokens);
            };
            let start = self.pos;
            let line = self.line;
            let column = self.column_at(start);
            let (kind, value) = match c {
                '<' => self.iri_or_less(line, column)?,
                '?' | '$' => {
                    if matches!(self.peek_nth(1), Some(n) if is_var_char(n)) {
                        self.bump();
                        let name = self.take_while(is_var_char);
                        (TokenKind::Variable, name.to_string())
                    } else if c == '?' {
                        self.bump();
                        (TokenKind::PathOperator, "?".to_string())
                    } else {
                        return self.error("unexpected character '$'", line, column);
                    }
                }
                '"' | '\'' => (TokenKind::String, self.string(line, column)?),
                '@' => {
                    self.bump();
                    let tag = self.take_while(|c| c.is_ascii_alphanumeric() || c == '-');
                    if tag.is_empty() {
                        return self.error("empty language tag", line, column);
                    }
                    (TokenKind::LangTag, tag.to_string())
                }
                '%' => {
                    self.bump();
                    let name = self.take_while(|c| c.is_alphanumeric() || c == '_' || c == '-');
                    if name.is_empty() {
                        return self.error("expected name after '%'", line, column);
                    }
                    (TokenKind::NamedSet, name.to_string())
                }
                '_' if self.peek_nth(1) == Some(':') => {
                    self.bump();
                    self.bump();
                    let label = self.pn_local();
                    if label.is_empty() {
                        return self.error("empty blank node label", line, column);
                    }
                    (TokenKind::BlankNode, label)
                }
                c if c.is_ascii_digit() => (TokenKind::Number, self.number()),
                '.' if matches!(self.peek_nth(1), Some(d) if d.is_ascii_digit()) => {
                    (TokenKind::Number, self.number())
                }
                c if c.is_alphabetic() || c == '_' || c == ':' => self.word(),
                _ => self.punctuation(line, column)?,
            };
            let lexeme = self.text[start..self.pos].to_string();
            self.tokens.push(Token {
                kind,
                lexeme,
                value,
                line,
                column,
                start,
                end: self.pos,
            });
        }
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('#') => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => return,
            }
        }
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if pred(c)) {
            self.bump();
        }
        &self.text[start..self.pos]
    }

    fn iri_or_less(&mut self, line: usize, column: usize) -> Result<(TokenKind, String), TokenizeError> {
        let rest = self.rest();
        let mut end = None;
        for (i, c) in rest.char_indices().skip(1) {
            match c {
                '>' => {
                    end = Some(i);
                    break;
                }
                c if c.is_whitespace() || matches!(c, '<' | '"' | '{' | '}' | '|' | '^' | '`') => break,
                _ => {}
            }
        }
        match end {
            Some(end) => {
                let raw = &rest[1..end];
                let value = unescape_iri(raw).ok_or_else(|| TokenizeError {
                    message: "invalid escape in IRI".to_string(),
                    line,
                    column,
                })?;
                for _ in 0..=end {
                    self.bump();
                }
                Ok((TokenKind::Iri, value))
            }
            None => {
                // `<` without a closing `>` is an operator unless it clearly
                // started an IRI that runs into end of line or input
                let next = rest[1..].chars().next();
                let looks_like_iri = matches!(next, Some(c) if c.is_ascii_alphabetic())
                    && rest[1..]
                        .split(|c: char| c.is_whitespace())
                        .next()
                        .is_some_and(|w| w.contains("://"));
                if looks_like_iri {
                    return self.error("unterminated IRI", line, column);
                }
                self.bump();
                if self.peek() == Some('=') {
                    self.bump();
                    Ok((TokenKind::Punctuation, "<=".to_string()))
                } else {
                    Ok((TokenKind::Punctuation, "<".to_string()))
                }
            }
        }
    }

    fn string(&mut self, line: usize, column: usize) -> Result<String, TokenizeError> {
        let quote = self.bump().unwrap_or('"');
        let long = self.peek() == Some(quote) && self.peek_nth(1) == Some(quote);
        if long {
            self.bump();
            self.bump();
        }
        let mut value = String::new();
        loop {
            let Some(c) = self.bump() else {
                return self.error("unterminated string", line, column);
            };
            match c {
                '\\' => {
                    let escaped = match self.bump() {
                        Some('t') => '\t',
                        Some('b') => '\u{8}',
                        Some('n') => '\n',
                        Some('r') => '\r',
                        Some('f') => '\u{c}',
                        Some('"') => '"',
                        Some('\'') => '\'',
                        Some('\\') => '\\',
                        Some(u @ ('u' | 'U')) => {
                            let len = if u == 'u' { 4 } else { 8 };
                            let hex: String = (0..len).filter_map(|_| self.bump()).collect();
                            match u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32) {
                                Some(c) if hex.len() == len => c,
                                _ => return self.error("invalid unicode escape", self.line, self.column_at(self.pos)),
                            }
                        }
                        _ => return self.error("invalid escape in string", self.line, self.column_at(self.pos)),
                    };
                    value.push(escaped);
                }
                c if c == quote => {
                    if !long {
                        return Ok(value);
                    }
                    if self.peek() == Some(quote) && self.peek_nth(1) == Some(quote) {
                        if self.peek_nth(2) == Some(quote) {
                            value.push(c);
                            continue;
                        }
                        self.bump();
                        self.bump();
                        return Ok(value);
                    }
                    value.push(c);
                }
                '\n' | '\r' if !long => {
                    return self.error("unterminated string", line, column);
                }
                c => value.push(c),
            }
        }
    }

    fn number(&mut self) -> String {
        let start = self.pos;
        self.take_while(|c| c.is_ascii_digit());
        if self.peek() == Some('.') && matches!(self.peek_nth(1), Some(d) if d.is_ascii_digit()) {
            self.bump();
            self.take_while(|c| c.is_ascii_digit());
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let mut n = 1;
            if matches!(self.peek_nth(1), Some('+' | '-')) {
                n = 2;
            }
            if matches!(self.peek_nth(n), Some(d) if d.is_ascii_digit()) {
                for _ in 0..n {
                    self.bump();
                }
                self.take_while(|c| c.is_ascii_digit());
            }
        }
        self.text[start..self.pos].to_string()
    }

    /// Bare word: a keyword, or a prefixed name when a `:` follows.
    fn word(&mut self) -> (TokenKind, String) {
        let rest = self.rest();
        let run_len = rest
            .char_indices()
            .find(|&(_, c)| !(c.is_alphanumeric() || matches!(c, '_' | '-' | '.')))
            .map_or(rest.len(), |(i, _)| i);
        let run = &rest[..run_len];
        let is_pname = rest[run_len..].starts_with(':')
            && !run.ends_with('.')
            && (run.is_empty() || run.starts_with(|c: char| c.is_alphabetic()));
        if is_pname {
            for _ in run.chars() {
                self.bump();
            }
            self.bump();
            let local = self.pn_local();
            let lexeme = format!("{run}:{local}");
            return (TokenKind::PrefixedName, lexeme);
        }
        let word = self.take_while(|c| c.is_alphanumeric() || c == '_');
        if word == "a" {
            (TokenKind::Keyword, "a".to_string())
        } else {
            (TokenKind::Keyword, word.to_ascii_uppercase())
        }
    }

    /// Local part of a prefixed name or blank node label; a trailing `.`
    /// is left for the triple terminator.
    fn pn_local(&mut self) -> String {
        let mut out = String::new();
        loop {
            match self.peek() {
                Some(c) if c.is_alphanumeric() || matches!(c, '_' | '-' | ':' | '\u{b7}') => {
                    self.bump();
                    out.push(c);
                }
                Some('.') => match self.peek_nth(1) {
                    Some(n) if n.is_alphanumeric() || matches!(n, '_' | '-' | ':' | '%' | '\\') => {
                        self.bump();
                        out.push('.');
                    }
                    _ => break,
                },
                Some('%') if matches!((self.peek_nth(1), self.peek_nth(2)), (Some(a), Some(b)) if a.is_ascii_hexdigit() && b.is_ascii_hexdigit()) => {
                    for _ in 0..3 {
                        out.push(self.bump().unwrap_or_default());
                    }
                }
                Some('\\') if matches!(self.peek_nth(1), Some(n) if "_~.-!$&'()*+,;=/?#@%".contains(n)) => {
                    self.bump();
                    out.push('\\');
                    out.push(self.bump().unwrap_or_default());
                }
                _ => break,
            }
        }
        out
    }

    fn punctuation(&mut self, line: usize, column: usize) -> Result<(TokenKind, String), TokenizeError> {
        let two = self.rest().get(..2).unwrap_or("");
        let op = match two {
            "^^" | "&&" | "||" | "!=" | ">=" => Some(two),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            self.bump();
            return Ok((TokenKind::Punctuation, op.to_string()));
        }
        let c = self.bump().unwrap_or_default();
        let kind = match c {
            '{' | '}' | '(' | ')' | '[' | ']' | '.' | ',' | ';' | '=' | '>' | '-' => TokenKind::Punctuation,
            '/' | '|' | '^' | '*' | '+' | '!' => TokenKind::PathOperator,
            _ => return self.error(format!("unexpected character {c:?}"), line, column),
        };
        Ok((kind, c.to_string()))
    }
}

fn is_var_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\u{b7}'
}

fn unescape_iri(raw: &str) -> Option<String> {
    if !raw.contains('\\') {
        return Some(raw.to_string());
    }
    let mut out = String::new();
    let mut chars = raw.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        let len = match chars.next()? {
            'u' => 4,
            'U' => 8,
            _ => return None,
        };
        let hex: String = chars.by_ref().take(len).collect();
        if hex.len() != len {
            return None;
        }
        out.push(char::from_u32(u32::from_str_radix(&hex, 16).ok()?)?);
    }
    Some(out)
}
