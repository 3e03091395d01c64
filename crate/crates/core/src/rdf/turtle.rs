use super::{is_absolute_iri, vocab, Literal, PrefixMap, Term, Triple};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TurtleError {
    #[error("syntax error at {line}:{column}: {message} (found {found})")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
        found: String,
    },
    #[error("undeclared prefix '{prefix}' at {line}:{column}")]
    UndeclaredPrefix {
        prefix: String,
        line: usize,
        column: usize,
    },
    #[error("unsupported Turtle feature at {line}:{column}: {feature}")]
    Unsupported {
        feature: String,
        line: usize,
        column: usize,
    },
}

impl TurtleError {
    pub fn line(&self) -> usize {
        match self {
            TurtleError::Syntax { line, .. }
            | TurtleError::UndeclaredPrefix { line, .. }
            | TurtleError::Unsupported { line, .. } => *line,
        }
    }
}

/// A triple together with the named graph it was read from, if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quad {
    pub triple: Triple,
    pub graph: Option<String>,
}

/// Parses a Turtle document. Graph blocks are rejected; use [`parse_trig`]
/// for bundles that may contain them.
pub fn parse_turtle(text: &str, base: Option<&str>) -> Result<(Vec<Triple>, PrefixMap), TurtleError> {
    let mut parser = Parser::new(text, base, false);
    parser.document()?;
    let triples = parser.quads.into_iter().map(|q| q.triple).collect();
    Ok((triples, parser.prefixes))
}

/// Parses Turtle extended with TriG graph blocks (`<g> { ... }`,
/// `GRAPH <g> { ... }` and bare `{ ... }` for the default graph).
pub fn parse_trig(text: &str, base: Option<&str>) -> Result<(Vec<Quad>, PrefixMap), TurtleError> {
    let mut parser = Parser::new(text, base, true);
    parser.document()?;
    Ok((parser.quads, parser.prefixes))
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
    base: Option<String>,
    prefixes: PrefixMap,
    quads: Vec<Quad>,
    graph: Option<String>,
    trig: bool,
    anon_counter: usize,
}

type PResult<T> = Result<T, TurtleError>;

impl<'a> Parser<'a> {
    fn new(text: &'a str, base: Option<&str>, trig: bool) -> Self {
        Self {
            text,
            pos: 0,
            base: base.map(str::to_string),
            prefixes: PrefixMap::new(),
            quads: Vec::new(),
            graph: None,
            trig,
            anon_counter: 0,
        }
    }

    fn position(&self, at: usize) -> (usize, usize) {
        let before = &self.text[..at.min(self.text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        (line, column)
    }

    fn found(&self) -> String {
        let rest = &self.text[self.pos..];
        if rest.is_empty() {
            return "end of input".to_string();
        }
        let token: String = rest
            .chars()
            .take_while(|c| !c.is_whitespace())
            .take(20)
            .collect();
        format!("'{token}'")
    }

    fn syntax<T>(&self, message: impl Into<String>) -> PResult<T> {
        let (line, column) = self.position(self.pos);
        Err(TurtleError::Syntax {
            line,
            column,
            message: message.into(),
            found: self.found(),
        })
    }

    fn unsupported<T>(&self, feature: &str) -> PResult<T> {
        let (line, column) = self.position(self.pos);
        Err(TurtleError::Unsupported {
            feature: feature.to_string(),
            line,
            column,
        })
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
        Some(c)
    }

    fn skip_ws(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('#') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> PResult<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.syntax(format!("expected '{c}'"))
        }
    }

    /// Case-insensitive keyword match that must not run into a name.
    fn eat_keyword(&mut self, keyword: &str) -> bool {
        self.skip_ws();
        let rest = self.rest();
        if rest.len() >= keyword.len()
            && rest.is_char_boundary(keyword.len())
            && rest[..keyword.len()].eq_ignore_ascii_case(keyword)
        {
            let next = rest[keyword.len()..].chars().next();
            if !matches!(next, Some(c) if is_name_char(c) || c == ':') {
                self.pos += keyword.len();
                return true;
            }
        }
        false
    }

    fn document(&mut self) -> PResult<()> {
        loop {
            self.skip_ws();
            if self.peek().is_none() {
                return Ok(());
            }
            self.statement()?;
        }
    }

    fn statement(&mut self) -> PResult<()> {
        if self.rest().starts_with("@prefix") {
            self.pos += "@prefix".len();
            self.prefix_decl()?;
            return self.expect('.');
        }
        if self.rest().starts_with("@base") {
            self.pos += "@base".len();
            self.base_decl()?;
            return self.expect('.');
        }
        if self.eat_keyword("PREFIX") {
            return self.prefix_decl();
        }
        if self.eat_keyword("BASE") {
            return self.base_decl();
        }
        if self.trig {
            if self.eat_keyword("GRAPH") {
                let graph = self.graph_label()?;
                return self.graph_block(Some(graph));
            }
            if self.peek() == Some('{') {
                return self.graph_block(None);
            }
        }
        if self.peek() == Some('[') {
            let start = self.pos;
            let subject = self.blank_node_property_list()?;
            self.skip_ws();
            if self.peek() == Some('.') {
                self.bump();
                return Ok(());
            }
            if self.peek().is_none() {
                self.pos = start;
                return self.syntax("unterminated statement");
            }
            self.predicate_object_list(&subject)?;
            return self.expect('.');
        }
        let subject_start = self.pos;
        let subject = self.subject()?;
        self.skip_ws();
        if self.peek() == Some('{') {
            if !self.trig {
                self.pos = subject_start;
                return self.unsupported("graph block (TriG) in a Turtle document");
            }
            let Term::Iri(graph) = subject else {
                self.pos = subject_start;
                return self.syntax("graph name must be an IRI");
            };
            return self.graph_block(Some(graph));
        }
        self.predicate_object_list(&subject)?;
        self.expect('.')
    }

    fn graph_label(&mut self) -> PResult<String> {
        match self.iri_or_pname()? {
            Some(iri) => Ok(iri),
            None => self.syntax("expected graph IRI"),
        }
    }

    fn graph_block(&mut self, graph: Option<String>) -> PResult<()> {
        if self.graph.is_some() {
            return self.syntax("nested graph blocks are not allowed");
        }
        self.expect('{')?;
        self.graph = graph;
        loop {
            self.skip_ws();
            if self.eat('}') {
                break;
            }
            let subject = if self.peek() == Some('[') {
                let subject = self.blank_node_property_list()?;
                self.skip_ws();
                if matches!(self.peek(), Some('.') | Some('}')) {
                    if self.eat('.') {
                        continue;
                    }
                    continue;
                }
                subject
            } else {
                self.subject()?
            };
            self.predicate_object_list(&subject)?;
            if !self.eat('.') {
                self.expect('}')?;
                break;
            }
        }
        self.graph = None;
        Ok(())
    }

    fn prefix_decl(&mut self) -> PResult<()> {
        self.skip_ws();
        let label = self.prefix_label()?;
        if !self.eat(':') {
            return self.syntax("expected ':' after prefix label");
        }
        self.skip_ws();
        let iri = self.iri_ref()?;
        self.prefixes.insert(label, iri);
        Ok(())
    }

    fn base_decl(&mut self) -> PResult<()> {
        self.skip_ws();
        let iri = self.iri_ref()?;
        self.base = Some(iri);
        Ok(())
    }

    fn prefix_label(&mut self) -> PResult<String> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if is_name_char(c) || c == '.' {
                self.bump();
            } else {
                break;
            }
        }
        let label = &self.text[start..self.pos];
        if label.ends_with('.') {
            return self.syntax("prefix label must not end with '.'");
        }
        if let Some(first) = label.chars().next() {
            if !first.is_alphabetic() {
                self.pos = start;
                return self.syntax("prefix label must start with a letter");
            }
        }
        Ok(label.to_string())
    }

    fn resolve(&self, iri: String, at: usize) -> PResult<String> {
        if is_absolute_iri(&iri) {
            return Ok(iri);
        }
        let Some(base) = &self.base else {
            let (line, column) = self.position(at);
            return Err(TurtleError::Syntax {
                line,
                column,
                message: "relative IRI without a base".to_string(),
                found: format!("<{iri}>"),
            });
        };
        match url::Url::parse(base).and_then(|b| b.join(&iri)) {
            Ok(resolved) => Ok(resolved.to_string()),
            Err(_) => {
                let (line, column) = self.position(at);
                Err(TurtleError::Syntax {
                    line,
                    column,
                    message: format!("cannot resolve IRI against base <{base}>"),
                    found: format!("<{iri}>"),
                })
            }
        }
    }

    /// `<...>` with `\u` escapes, resolved against the base.
    fn iri_ref(&mut self) -> PResult<String> {
        let start = self.pos;
        if self.peek() != Some('<') {
            return self.syntax("expected IRI");
        }
        self.bump();
        let mut value = String::new();
        loop {
            match self.bump() {
                None => {
                    self.pos = start;
                    return self.syntax("unterminated IRI");
                }
                Some('>') => break,
                Some('\\') => {
                    let c = self.unicode_escape()?;
                    value.push(c);
                }
                Some(c) if c.is_whitespace() || matches!(c, '<' | '"' | '{' | '}' | '|' | '^' | '`') => {
                    self.pos = start;
                    return self.syntax(format!("invalid character {c:?} in IRI"));
                }
                Some(c) => value.push(c),
            }
        }
        self.resolve(value, start)
    }

    fn unicode_escape(&mut self) -> PResult<char> {
        let len = match self.bump() {
            Some('u') => 4,
            Some('U') => 8,
            _ => return self.syntax("invalid escape sequence"),
        };
        let start = self.pos;
        for _ in 0..len {
            match self.bump() {
                Some(c) if c.is_ascii_hexdigit() => {}
                _ => return self.syntax("invalid unicode escape"),
            }
        }
        let code = u32::from_str_radix(&self.text[start..self.pos], 16).unwrap_or(u32::MAX);
        match char::from_u32(code) {
            Some(c) => Ok(c),
            None => self.syntax("unicode escape is not a scalar value"),
        }
    }

    /// IRI or prefixed name; `None` when the input starts with neither.
    fn iri_or_pname(&mut self) -> PResult<Option<String>> {
        self.skip_ws();
        match self.peek() {
            Some('<') => self.iri_ref().map(Some),
            Some(c) if c.is_alphabetic() || c == ':' => {
                let save = self.pos;
                let label = self.prefix_label()?;
                if self.peek() != Some(':') {
                    self.pos = save;
                    return Ok(None);
                }
                self.bump();
                let local = self.local_name()?;
                match self.prefixes.expand(&label, &local) {
                    Ok(iri) => Ok(Some(iri)),
                    Err(_) => {
                        let (line, column) = self.position(save);
                        Err(TurtleError::UndeclaredPrefix {
                            prefix: label,
                            line,
                            column,
                        })
                    }
                }
            }
            _ => Ok(None),
        }
    }

    fn local_name(&mut self) -> PResult<String> {
        let mut local = String::new();
        loop {
            match self.peek() {
                Some(c) if is_name_char(c) || c == ':' => {
                    self.bump();
                    local.push(c);
                }
                Some('.') => {
                    // a dot only belongs to the name when more name follows
                    match self.peek_nth(1) {
                        Some(n) if is_name_char(n) || n == ':' || n == '%' || n == '\\' => {
                            self.bump();
                            local.push('.');
                        }
                        _ => break,
                    }
                }
                Some('%') => {
                    self.bump();
                    let hex: String = (0..2).filter_map(|_| self.bump()).collect();
                    if hex.len() != 2 || !hex.chars().all(|c| c.is_ascii_hexdigit()) {
                        return self.syntax("invalid percent escape in local name");
                    }
                    local.push('%');
                    local.push_str(&hex);
                }
                Some('\\') => {
                    self.bump();
                    match self.bump() {
                        Some(c) if "_~.-!$&'()*+,;=/?#@%".contains(c) => local.push(c),
                        _ => return self.syntax("invalid local name escape"),
                    }
                }
                _ => break,
            }
        }
        Ok(local)
    }

    fn fresh_blank(&mut self) -> Term {
        let label = format!("genid~{}", self.anon_counter);
        self.anon_counter += 1;
        Term::BlankNode(label)
    }

    fn blank_label(&mut self) -> PResult<Term> {
        // caller saw "_:"
        self.pos += 2;
        let start = self.pos;
        while let Some(c) = self.peek() {
            let inner_dot = c == '.' && matches!(self.peek_nth(1), Some(n) if is_name_char(n));
            if !is_name_char(c) && !inner_dot {
                break;
            }
            self.bump();
        }
        if self.pos == start {
            return self.syntax("empty blank node label");
        }
        Ok(Term::BlankNode(self.text[start..self.pos].to_string()))
    }

    fn subject(&mut self) -> PResult<Term> {
        self.skip_ws();
        match self.peek() {
            Some('_') if self.rest().starts_with("_:") => self.blank_label(),
            Some('(') => self.unsupported("RDF collection"),
            Some('[') => self.blank_node_property_list(),
            _ => match self.iri_or_pname()? {
                Some(iri) => Ok(Term::Iri(iri)),
                None => self.syntax("expected subject"),
            },
        }
    }

    fn verb(&mut self) -> PResult<String> {
        self.skip_ws();
        if self.peek() == Some('a')
            && !matches!(self.peek_nth(1), Some(c) if is_name_char(c) || c == ':' || c == '.')
        {
            self.bump();
            return Ok(vocab::RDF_TYPE.to_string());
        }
        match self.iri_or_pname()? {
            Some(iri) => Ok(iri),
            None => self.syntax("expected predicate"),
        }
    }

    fn predicate_object_list(&mut self, subject: &Term) -> PResult<()> {
        loop {
            let predicate = self.verb()?;
            loop {
                let object = self.object()?;
                self.emit(subject.clone(), predicate.clone(), object);
                if !self.eat(',') {
                    break;
                }
            }
            if !self.eat(';') {
                return Ok(());
            }
            while self.eat(';') {}
            self.skip_ws();
            if matches!(self.peek(), Some('.') | Some(']') | Some('}') | None) {
                return Ok(());
            }
        }
    }

    fn emit(&mut self, subject: Term, predicate: String, object: Term) {
        self.quads.push(Quad {
            triple: Triple::new(subject, predicate, object),
            graph: self.graph.clone(),
        });
    }

    fn blank_node_property_list(&mut self) -> PResult<Term> {
        self.expect('[')?;
        let node = self.fresh_blank();
        if self.eat(']') {
            return Ok(node);
        }
        self.predicate_object_list(&node)?;
        self.expect(']')?;
        Ok(node)
    }

    fn object(&mut self) -> PResult<Term> {
        self.skip_ws();
        match self.peek() {
            Some('_') if self.rest().starts_with("_:") => self.blank_label(),
            Some('[') => self.blank_node_property_list(),
            Some('(') => self.unsupported("RDF collection"),
            Some('"') | Some('\'') => self.rdf_literal(),
            Some(c) if c.is_ascii_digit() || matches!(c, '+' | '-' | '.') => self.numeric(),
            _ => {
                if self.eat_keyword("true") {
                    return Ok(Term::Literal(Literal::typed("true", vocab::XSD_BOOLEAN)));
                }
                if self.eat_keyword("false") {
                    return Ok(Term::Literal(Literal::typed("false", vocab::XSD_BOOLEAN)));
                }
                if self.rest().starts_with("<<") {
                    return self.unsupported("quoted triple");
                }
                match self.iri_or_pname()? {
                    Some(iri) => Ok(Term::Iri(iri)),
                    None => self.syntax("expected object"),
                }
            }
        }
    }

    fn rdf_literal(&mut self) -> PResult<Term> {
        let lexical = self.string()?;
        if self.peek() == Some('@') {
            self.bump();
            let start = self.pos;
            while let Some(c) = self.peek() {
                if c.is_ascii_alphanumeric() || c == '-' {
                    self.bump();
                } else {
                    break;
                }
            }
            let tag = &self.text[start..self.pos];
            if tag.is_empty() || !tag.starts_with(|c: char| c.is_ascii_alphabetic()) {
                return self.syntax("invalid language tag");
            }
            return Ok(Term::Literal(Literal::lang(lexical, tag)));
        }
        if self.rest().starts_with("^^") {
            self.pos += 2;
            let Some(datatype) = self.iri_or_pname()? else {
                return self.syntax("expected datatype IRI");
            };
            return Ok(Term::Literal(Literal::typed(lexical, datatype)));
        }
        Ok(Term::Literal(Literal::simple(lexical)))
    }

    fn string(&mut self) -> PResult<String> {
        let start = self.pos;
        let quote = self.bump().unwrap_or('"');
        let long = self.rest().starts_with(&format!("{quote}{quote}"));
        if long {
            self.pos += 2;
        }
        let mut value = String::new();
        loop {
            let Some(c) = self.bump() else {
                self.pos = start;
                return self.syntax("unterminated string");
            };
            match c {
                '\\' => value.push(self.string_escape()?),
                c if c == quote => {
                    if !long {
                        return Ok(value);
                    }
                    let triple = format!("{quote}{quote}");
                    if self.rest().starts_with(&triple) {
                        // a run of more than three quotes ends with the last three
                        if self.peek_nth(2) == Some(quote) {
                            value.push(c);
                            continue;
                        }
                        self.pos += 2;
                        return Ok(value);
                    }
                    value.push(c);
                }
                '\n' | '\r' if !long => {
                    self.pos = start;
                    return self.syntax("line break in single-quoted string");
                }
                c => value.push(c),
            }
        }
    }

    fn string_escape(&mut self) -> PResult<char> {
        match self.peek() {
            Some('t') => { self.bump(); Ok('\t') }
            Some('b') => { self.bump(); Ok('\u{8}') }
            Some('n') => { self.bump(); Ok('\n') }
            Some('r') => { self.bump(); Ok('\r') }
            Some('f') => { self.bump(); Ok('\u{c}') }
            Some('"') => { self.bump(); Ok('"') }
            Some('\'') => { self.bump(); Ok('\'') }
            Some('\\') => { self.bump(); Ok('\\') }
            Some('u') | Some('U') => self.unicode_escape(),
            _ => self.syntax("invalid escape sequence in string"),
        }
    }

    fn numeric(&mut self) -> PResult<Term> {
        let start = self.pos;
        if matches!(self.peek(), Some('+') | Some('-')) {
            self.bump();
        }
        let mut digits_before = 0;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.bump();
            digits_before += 1;
        }
        let mut datatype = vocab::XSD_INTEGER;
        if self.peek() == Some('.') && matches!(self.peek_nth(1), Some(c) if c.is_ascii_digit()) {
            self.bump();
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.bump();
            }
            datatype = vocab::XSD_DECIMAL;
        } else if digits_before == 0 {
            self.pos = start;
            return self.syntax("expected number");
        }
        if matches!(self.peek(), Some('e') | Some('E')) {
            let save = self.pos;
            self.bump();
            if matches!(self.peek(), Some('+') | Some('-')) {
                self.bump();
            }
            let exp_start = self.pos;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.bump();
            }
            if self.pos == exp_start {
                self.pos = save;
            } else {
                datatype = vocab::XSD_DOUBLE;
            }
        }
        Ok(Term::Literal(Literal::typed(&self.text[start..self.pos], datatype)))
    }
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-' || c == '\u{b7}'
}
