//! Recursive-descent parser for the supported SPARQL 1.1 query subset.

use std::collections::HashSet;

use super::ast::*;
use super::token::{tokenize, Token, TokenKind, TokenizeError};
use crate::rdf::{is_absolute_iri, vocab, Literal, PrefixMap, Term};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error(transparent)]
    Tokenize(#[from] TokenizeError),
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
    #[error("unknown query form {found} at {line}:{column}")]
    UnknownQueryForm {
        found: String,
        line: usize,
        column: usize,
    },
    #[error("unsupported construct at {line}:{column}: {feature}")]
    Unsupported {
        feature: String,
        line: usize,
        column: usize,
    },
    #[error("empty query")]
    EmptyQuery,
}

impl ParseError {
    pub fn is_undeclared_prefix(&self) -> bool {
        matches!(self, ParseError::UndeclaredPrefix { .. })
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            ParseError::Tokenize(e) => Some(e.line),
            ParseError::Syntax { line, .. }
            | ParseError::UndeclaredPrefix { line, .. }
            | ParseError::UnknownQueryForm { line, .. }
            | ParseError::Unsupported { line, .. } => Some(*line),
            ParseError::EmptyQuery => None,
        }
    }
}

type PResult<T> = Result<T, ParseError>;

/// Parses a query. `extra_prefixes` are consulted for prefix labels the
/// query does not declare; every binding used that way is recorded in
/// [`Prologue::injected`].
pub fn parse_query(text: &str, extra_prefixes: Option<&PrefixMap>, dialect: Dialect) -> PResult<Query> {
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Err(ParseError::EmptyQuery);
    }
    let blank_labels = tokens
        .iter()
        .filter(|t| t.kind == TokenKind::BlankNode)
        .map(|t| t.value.clone())
        .collect();
    let mut parser = Parser {
        tokens,
        pos: 0,
        dialect,
        extra: extra_prefixes,
        prologue: Prologue::default(),
        blank_labels,
        anon_counter: 0,
    };
    parser.query()
}

/// Keywords that never start a function call, even when a `(` follows.
const STRUCTURAL: &[&str] = &[
    "SELECT", "WHERE", "FROM", "NAMED", "LIMIT", "OFFSET", "VALUES", "GROUP", "ORDER", "HAVING", "BY",
    "OPTIONAL", "UNION", "MINUS", "GRAPH", "SERVICE", "FILTER", "BIND", "WITH", "INCLUDE", "AS",
    "DISTINCT", "REDUCED", "ASK", "CONSTRUCT", "DESCRIBE", "a",
];

const UPDATE_KEYWORDS: &[&str] = &[
    "INSERT", "DELETE", "LOAD", "CLEAR", "DROP", "CREATE", "ADD", "MOVE", "COPY",
];

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    dialect: Dialect,
    extra: Option<&'a PrefixMap>,
    prologue: Prologue,
    blank_labels: HashSet<String>,
    anon_counter: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, offset: usize) -> Option<&Token> {
        self.tokens.get(self.pos + offset)
    }

    fn next(&mut self) -> Option<Token> {
        let token = self.tokens.get(self.pos).cloned();
        if token.is_some() {
            self.pos += 1;
        }
        token
    }

    fn at_keyword(&self, keyword: &str) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(keyword))
    }

    fn at_punct(&self, punct: &str) -> bool {
        self.peek().is_some_and(|t| t.is_punct(punct))
    }

    fn eat_keyword(&mut self, keyword: &str) -> bool {
        let hit = self.at_keyword(keyword);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn eat_punct(&mut self, punct: &str) -> bool {
        let hit = self.at_punct(punct);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        let (line, column, found) = match self.peek() {
            Some(t) => (t.line, t.column, t.to_string()),
            None => {
                let last = self.tokens.last();
                (
                    last.map_or(1, |t| t.line),
                    last.map_or(1, |t| t.column + t.lexeme.chars().count()),
                    "end of query".to_string(),
                )
            }
        };
        Err(ParseError::Syntax {
            line,
            column,
            message: message.into(),
            found,
        })
    }

    fn unsupported<T>(&self, feature: &str) -> PResult<T> {
        let (line, column) = self.peek().map_or((1, 1), |t| (t.line, t.column));
        Err(ParseError::Unsupported {
            feature: feature.to_string(),
            line,
            column,
        })
    }

    fn expect_keyword(&mut self, keyword: &str) -> PResult<()> {
        if self.eat_keyword(keyword) {
            Ok(())
        } else {
            self.error(format!("expected {keyword}"))
        }
    }

    fn expect_punct(&mut self, punct: &str) -> PResult<()> {
        if self.eat_punct(punct) {
            Ok(())
        } else {
            self.error(format!("expected '{punct}'"))
        }
    }

    fn expect_variable(&mut self) -> PResult<String> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Variable => {
                let name = t.value.clone();
                self.pos += 1;
                Ok(name)
            }
            _ => self.error("expected variable"),
        }
    }

    fn query(&mut self) -> PResult<Query> {
        self.prologue_decls()?;
        let Some(head) = self.peek().cloned() else {
            return self.error("expected query form");
        };
        let mut construct_short = false;
        let form = if head.is_keyword("SELECT") {
            QueryForm::Select(self.select_clause()?)
        } else if self.eat_keyword("ASK") {
            QueryForm::Ask
        } else if self.eat_keyword("CONSTRUCT") {
            if self.at_punct("{") {
                QueryForm::Construct(self.triples_template()?)
            } else {
                construct_short = true;
                QueryForm::Construct(Vec::new())
            }
        } else if self.eat_keyword("DESCRIBE") {
            QueryForm::Describe(self.describe_targets()?)
        } else if head.kind == TokenKind::Keyword
            && (UPDATE_KEYWORDS.iter().any(|k| head.is_keyword(k)) || head.is_keyword("WITH"))
        {
            return self.unsupported("SPARQL Update");
        } else {
            return Err(ParseError::UnknownQueryForm {
                found: head.to_string(),
                line: head.line,
                column: head.column,
            });
        };

        let mut named = Vec::new();
        self.named_subqueries(&mut named)?;
        let mut dataset = Vec::new();
        while self.eat_keyword("FROM") {
            let named_graph = self.eat_keyword("NAMED");
            let iri = self.iri()?;
            dataset.push(DatasetClause { named: named_graph, iri });
        }
        self.named_subqueries(&mut named)?;

        let mut form = form;
        let where_clause = if construct_short {
            self.expect_keyword("WHERE")?;
            let template = self.triples_template()?;
            form = QueryForm::Construct(template.clone());
            Some(GroupPattern {
                elements: if template.is_empty() {
                    Vec::new()
                } else {
                    vec![GroupElement::Bgp(template)]
                },
            })
        } else if self.eat_keyword("WHERE") || self.at_punct("{") {
            Some(self.group_graph_pattern()?.0)
        } else if matches!(form, QueryForm::Describe(_)) {
            None
        } else {
            return self.error("expected WHERE clause");
        };
        self.named_subqueries(&mut named)?;
        let modifiers = self.solution_modifiers()?;
        self.named_subqueries(&mut named)?;
        let values = if self.eat_keyword("VALUES") {
            Some(self.data_block()?)
        } else {
            None
        };
        self.named_subqueries(&mut named)?;
        if self.peek().is_some() {
            return self.error("unexpected trailing input");
        }
        Ok(Query {
            prologue: std::mem::take(&mut self.prologue),
            form,
            dataset,
            named_subqueries: named,
            where_clause,
            modifiers,
            values,
        })
    }

    fn prologue_decls(&mut self) -> PResult<()> {
        loop {
            if self.eat_keyword("BASE") {
                let iri = self.iri()?;
                self.prologue.base = Some(iri);
            } else if self.eat_keyword("PREFIX") {
                let label = match self.peek() {
                    Some(t) if t.kind == TokenKind::PrefixedName && t.local_name() == Some("") => {
                        t.prefix_label().unwrap_or_default().to_string()
                    }
                    _ => return self.error("expected prefix label ending in ':'"),
                };
                self.pos += 1;
                let iri = self.iri()?;
                self.prologue.prefixes.insert(label, iri);
            } else {
                return Ok(());
            }
        }
    }

    fn named_subqueries(&mut self, out: &mut Vec<NamedSubquery>) -> PResult<()> {
        while self.at_keyword("WITH") && self.peek_at(1).is_some_and(|t| t.is_punct("{")) {
            if self.dialect == Dialect::Strict {
                return self.error("named subqueries (WITH { ... } AS %name) are not SPARQL 1.1");
            }
            self.pos += 1;
            self.expect_punct("{")?;
            let query = self.sub_select()?;
            self.expect_punct("}")?;
            self.expect_keyword("AS")?;
            let name = match self.next() {
                Some(t) if t.kind == TokenKind::NamedSet => t.value,
                _ => {
                    self.pos -= 1;
                    return self.error("expected %name after AS");
                }
            };
            out.push(NamedSubquery {
                name,
                query: Box::new(query),
            });
        }
        Ok(())
    }

    fn select_clause(&mut self) -> PResult<SelectClause> {
        self.expect_keyword("SELECT")?;
        let modifier = if self.eat_keyword("DISTINCT") {
            Some(SelectModifier::Distinct)
        } else if self.eat_keyword("REDUCED") {
            Some(SelectModifier::Reduced)
        } else {
            None
        };
        if self.eat_punct("*") {
            return Ok(SelectClause {
                modifier,
                projection: Projection::Star,
            });
        }
        let mut items = Vec::new();
        loop {
            match self.peek() {
                Some(t) if t.kind == TokenKind::Variable => {
                    items.push(ProjectionItem::Variable(t.value.clone()));
                    self.pos += 1;
                }
                Some(t) if t.is_punct("(") => {
                    self.pos += 1;
                    let expression = self.expression_until_as()?;
                    let alias = self.expect_variable()?;
                    self.expect_punct(")")?;
                    items.push(ProjectionItem::Expression { expression, alias });
                }
                _ => break,
            }
        }
        if items.is_empty() {
            return self.error("expected projection");
        }
        Ok(SelectClause {
            modifier,
            projection: Projection::Items(items),
        })
    }

    fn describe_targets(&mut self) -> PResult<DescribeTargets> {
        if self.eat_punct("*") {
            return Ok(DescribeTargets::Star);
        }
        let mut terms = Vec::new();
        while let Some(t) = self.peek() {
            match t.kind {
                TokenKind::Variable | TokenKind::Iri | TokenKind::PrefixedName => terms.push(self.var_or_term()?),
                _ => break,
            }
        }
        if terms.is_empty() {
            return self.error("expected DESCRIBE target");
        }
        Ok(DescribeTargets::Terms(terms))
    }

    fn sub_select(&mut self) -> PResult<Query> {
        let select = self.select_clause()?;
        self.eat_keyword("WHERE");
        let (where_clause, _) = self.group_graph_pattern()?;
        let modifiers = self.solution_modifiers()?;
        let values = if self.eat_keyword("VALUES") {
            Some(self.data_block()?)
        } else {
            None
        };
        Ok(Query {
            prologue: Prologue::default(),
            form: QueryForm::Select(select),
            dataset: Vec::new(),
            named_subqueries: Vec::new(),
            where_clause: Some(where_clause),
            modifiers,
            values,
        })
    }

    /// Returns the group and whether it was a bare sub-select `{ SELECT ... }`.
    fn group_graph_pattern(&mut self) -> PResult<(GroupPattern, bool)> {
        self.expect_punct("{")?;
        if self.at_keyword("SELECT") {
            let query = self.sub_select()?;
            self.expect_punct("}")?;
            return Ok((
                GroupPattern {
                    elements: vec![GroupElement::SubSelect(Box::new(query))],
                },
                true,
            ));
        }
        let mut elements = Vec::new();
        let mut bgp: Vec<TriplePattern> = Vec::new();
        let mut need_dot = false;
        loop {
            let Some(token) = self.peek().cloned() else {
                return self.error("unterminated group, expected '}'");
            };
            if token.is_punct("}") {
                self.pos += 1;
                break;
            }
            if self.starts_triples(&token) {
                if need_dot {
                    return self.error("expected '.' between triple patterns");
                }
                self.triples_same_subject(&mut bgp)?;
                need_dot = !self.eat_punct(".");
                continue;
            }
            if !bgp.is_empty() {
                elements.push(GroupElement::Bgp(std::mem::take(&mut bgp)));
            }
            need_dot = false;
            let element = if self.eat_keyword("OPTIONAL") {
                GroupElement::Optional(self.group_graph_pattern()?.0)
            } else if self.eat_keyword("MINUS") {
                GroupElement::Minus(self.group_graph_pattern()?.0)
            } else if self.eat_keyword("GRAPH") {
                let name = self.var_or_iri()?;
                let pattern = self.group_graph_pattern()?.0;
                GroupElement::Graph { name, pattern }
            } else if self.eat_keyword("SERVICE") {
                let silent = self.eat_keyword("SILENT");
                let endpoint = self.var_or_iri()?;
                let pattern = self.group_graph_pattern()?.0;
                GroupElement::Service {
                    endpoint,
                    silent,
                    pattern,
                }
            } else if self.eat_keyword("FILTER") {
                GroupElement::Filter(self.constraint()?)
            } else if self.eat_keyword("BIND") {
                self.expect_punct("(")?;
                let expression = self.expression_until_as()?;
                let variable = self.expect_variable()?;
                self.expect_punct(")")?;
                GroupElement::Bind { expression, variable }
            } else if self.eat_keyword("VALUES") {
                GroupElement::Values(self.data_block()?)
            } else if token.is_keyword("INCLUDE") {
                if self.dialect == Dialect::Strict {
                    return self.error("INCLUDE %name is not SPARQL 1.1");
                }
                self.pos += 1;
                match self.next() {
                    Some(t) if t.kind == TokenKind::NamedSet => GroupElement::NamedInclude(t.value),
                    _ => {
                        self.pos -= 1;
                        return self.error("expected %name after INCLUDE");
                    }
                }
            } else if token.is_punct("{") {
                let (first, is_sub) = self.group_graph_pattern()?;
                if self.at_keyword("UNION") {
                    let mut branches = vec![first];
                    while self.eat_keyword("UNION") {
                        branches.push(self.group_graph_pattern()?.0);
                    }
                    GroupElement::Union(branches)
                } else if is_sub {
                    first.elements.into_iter().next().expect("sub-select group has one element")
                } else {
                    GroupElement::Group(first)
                }
            } else if token.kind == TokenKind::NamedSet {
                return self.error("named subquery reference outside INCLUDE");
            } else {
                return self.error("expected triple pattern or group element");
            };
            elements.push(element);
            self.eat_punct(".");
        }
        if !bgp.is_empty() {
            elements.push(GroupElement::Bgp(bgp));
        }
        Ok((GroupPattern { elements }, false))
    }

    fn starts_triples(&self, token: &Token) -> bool {
        match token.kind {
            TokenKind::Variable
            | TokenKind::Iri
            | TokenKind::PrefixedName
            | TokenKind::BlankNode
            | TokenKind::String
            | TokenKind::Number => true,
            TokenKind::Keyword => token.is_keyword("TRUE") || token.is_keyword("FALSE"),
            TokenKind::Punctuation | TokenKind::PathOperator => {
                token.is_punct("[")
                    || token.is_punct("(")
                    || ((token.is_punct("-") || token.is_punct("+"))
                        && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Number))
            }
            _ => false,
        }
    }

    fn triples_template(&mut self) -> PResult<Vec<TriplePattern>> {
        self.expect_punct("{")?;
        let mut triples = Vec::new();
        loop {
            if self.eat_punct("}") {
                return Ok(triples);
            }
            match self.peek() {
                Some(t) if self.starts_triples(&t.clone()) => {}
                _ => return self.error("expected triple pattern or '}'"),
            }
            self.triples_same_subject(&mut triples)?;
            if !self.eat_punct(".") {
                self.expect_punct("}")?;
                return Ok(triples);
            }
        }
    }

    fn fresh_blank(&mut self) -> VarOrTerm {
        loop {
            let label = format!("anon{}", self.anon_counter);
            self.anon_counter += 1;
            if !self.blank_labels.contains(&label) {
                return VarOrTerm::Term(Term::BlankNode(label));
            }
        }
    }

    fn triples_same_subject(&mut self, out: &mut Vec<TriplePattern>) -> PResult<()> {
        if self.at_punct("(") {
            return self.unsupported("RDF collection");
        }
        if self.at_punct("[") {
            let subject = self.blank_node_property_list(out)?;
            if self.starts_verb() {
                self.property_list(&subject, out)?;
            }
            return Ok(());
        }
        let subject = self.var_or_term()?;
        if !self.starts_verb() {
            return self.error("expected predicate");
        }
        self.property_list(&subject, out)
    }

    fn starts_verb(&self) -> bool {
        self.peek().is_some_and(|t| {
            matches!(t.kind, TokenKind::Variable | TokenKind::Iri | TokenKind::PrefixedName)
                || t.is_keyword("a")
                || t.is_punct("^")
                || t.is_punct("!")
                || t.is_punct("(")
        })
    }

    fn property_list(&mut self, subject: &VarOrTerm, out: &mut Vec<TriplePattern>) -> PResult<()> {
        loop {
            let predicate = match self.peek() {
                Some(t) if t.kind == TokenKind::Variable => {
                    let name = t.value.clone();
                    self.pos += 1;
                    Predicate::Variable(name)
                }
                _ => Predicate::Path(self.path()?),
            };
            loop {
                let object = self.object(out)?;
                out.push(TriplePattern {
                    subject: subject.clone(),
                    predicate: predicate.clone(),
                    object,
                });
                if !self.eat_punct(",") {
                    break;
                }
            }
            if !self.eat_punct(";") {
                return Ok(());
            }
            while self.eat_punct(";") {}
            if !self.starts_verb() {
                return Ok(());
            }
        }
    }

    fn blank_node_property_list(&mut self, out: &mut Vec<TriplePattern>) -> PResult<VarOrTerm> {
        self.expect_punct("[")?;
        let node = self.fresh_blank();
        if self.eat_punct("]") {
            return Ok(node);
        }
        self.property_list(&node, out)?;
        self.expect_punct("]")?;
        Ok(node)
    }

    fn object(&mut self, out: &mut Vec<TriplePattern>) -> PResult<VarOrTerm> {
        if self.at_punct("[") {
            return self.blank_node_property_list(out);
        }
        if self.at_punct("(") {
            return self.unsupported("RDF collection");
        }
        self.var_or_term()
    }

    fn path(&mut self) -> PResult<PropertyPath> {
        let first = self.path_sequence()?;
        if !self.at_punct("|") {
            return Ok(first);
        }
        let mut members = vec![first];
        while self.eat_punct("|") {
            members.push(self.path_sequence()?);
        }
        Ok(PropertyPath::Alternative(members))
    }

    fn path_sequence(&mut self) -> PResult<PropertyPath> {
        let first = self.path_elt_or_inverse()?;
        if !self.at_punct("/") {
            return Ok(first);
        }
        let mut members = vec![first];
        while self.eat_punct("/") {
            members.push(self.path_elt_or_inverse()?);
        }
        Ok(PropertyPath::Sequence(members))
    }

    fn path_elt_or_inverse(&mut self) -> PResult<PropertyPath> {
        if self.eat_punct("^") {
            return Ok(PropertyPath::Inverse(Box::new(self.path_elt()?)));
        }
        self.path_elt()
    }

    fn path_elt(&mut self) -> PResult<PropertyPath> {
        let primary = self.path_primary()?;
        let wrapped = match self.peek() {
            Some(t) if t.kind == TokenKind::PathOperator && t.lexeme == "*" => PropertyPath::ZeroOrMore(Box::new(primary)),
            Some(t) if t.kind == TokenKind::PathOperator && t.lexeme == "+" => PropertyPath::OneOrMore(Box::new(primary)),
            Some(t) if t.kind == TokenKind::PathOperator && t.lexeme == "?" => PropertyPath::ZeroOrOne(Box::new(primary)),
            _ => return Ok(primary),
        };
        self.pos += 1;
        Ok(wrapped)
    }

    fn path_primary(&mut self) -> PResult<PropertyPath> {
        if self.eat_keyword("a") {
            return Ok(PropertyPath::Link(vocab::RDF_TYPE.to_string()));
        }
        if self.eat_punct("!") {
            let mut links = Vec::new();
            if self.eat_punct("(") {
                if !self.at_punct(")") {
                    links.push(self.negated_link()?);
                    while self.eat_punct("|") {
                        links.push(self.negated_link()?);
                    }
                }
                self.expect_punct(")")?;
            } else {
                links.push(self.negated_link()?);
            }
            return Ok(PropertyPath::NegatedSet(links));
        }
        if self.eat_punct("(") {
            let inner = self.path()?;
            self.expect_punct(")")?;
            return Ok(inner);
        }
        match self.peek() {
            Some(t) if matches!(t.kind, TokenKind::Iri | TokenKind::PrefixedName) => Ok(PropertyPath::Link(self.iri()?)),
            _ => self.error("expected predicate"),
        }
    }

    fn negated_link(&mut self) -> PResult<NegatedLink> {
        let inverse = self.eat_punct("^");
        let iri = if self.eat_keyword("a") {
            vocab::RDF_TYPE.to_string()
        } else {
            self.iri()?
        };
        Ok(NegatedLink { iri, inverse })
    }

    fn var_or_iri(&mut self) -> PResult<VarOrTerm> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Variable => {
                let name = t.value.clone();
                self.pos += 1;
                Ok(VarOrTerm::Variable(name))
            }
            _ => Ok(VarOrTerm::iri(self.iri()?)),
        }
    }

    fn iri(&mut self) -> PResult<String> {
        let Some(token) = self.peek().cloned() else {
            return self.error("expected IRI");
        };
        match token.kind {
            TokenKind::Iri => {
                self.pos += 1;
                Ok(self.resolve(&token.value))
            }
            TokenKind::PrefixedName => {
                self.pos += 1;
                self.expand(&token)
            }
            _ => self.error("expected IRI"),
        }
    }

    fn resolve(&self, iri: &str) -> String {
        match &self.prologue.base {
            Some(base) if !is_absolute_iri(iri) => url::Url::parse(base)
                .and_then(|b| b.join(iri))
                .map(|u| u.to_string())
                .unwrap_or_else(|_| iri.to_string()),
            _ => iri.to_string(),
        }
    }

    fn expand(&mut self, token: &Token) -> PResult<String> {
        let label = token.prefix_label().unwrap_or_default();
        let local = unescape_local(token.local_name().unwrap_or_default());
        self.lookup_prefix(label, token)
            .map(|ns| format!("{ns}{local}"))
    }

    fn lookup_prefix(&mut self, label: &str, token: &Token) -> PResult<String> {
        if let Some(ns) = self.prologue.prefixes.get(label) {
            return Ok(ns.to_string());
        }
        if let Some(ns) = self.prologue.injected.get(label) {
            return Ok(ns.to_string());
        }
        if let Some(ns) = self.extra.and_then(|extra| extra.get(label)) {
            let ns = ns.to_string();
            self.prologue.injected.insert(label, ns.clone());
            return Ok(ns);
        }
        Err(ParseError::UndeclaredPrefix {
            prefix: label.to_string(),
            line: token.line,
            column: token.column,
        })
    }

    fn var_or_term(&mut self) -> PResult<VarOrTerm> {
        let Some(token) = self.peek().cloned() else {
            return self.error("expected term");
        };
        let term = match token.kind {
            TokenKind::Variable => {
                self.pos += 1;
                return Ok(VarOrTerm::Variable(token.value));
            }
            TokenKind::Iri | TokenKind::PrefixedName => Term::Iri(self.iri()?),
            TokenKind::BlankNode => {
                self.pos += 1;
                Term::BlankNode(token.value)
            }
            TokenKind::String => Term::Literal(self.rdf_literal()?),
            TokenKind::Number => {
                self.pos += 1;
                Term::Literal(numeric_literal(&token.value))
            }
            TokenKind::Keyword if token.is_keyword("TRUE") || token.is_keyword("FALSE") => {
                self.pos += 1;
                Term::Literal(Literal::typed(token.value.to_ascii_lowercase(), vocab::XSD_BOOLEAN))
            }
            TokenKind::Punctuation | TokenKind::PathOperator
                if (token.is_punct("-") || token.is_punct("+"))
                    && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Number) =>
            {
                self.pos += 1;
                let number = self.next().expect("checked above");
                let lexical = if token.lexeme == "-" {
                    format!("-{}", number.value)
                } else {
                    format!("+{}", number.value)
                };
                Term::Literal(numeric_literal(&lexical))
            }
            _ if token.is_punct("[") && self.peek_at(1).is_some_and(|t| t.is_punct("]")) => {
                self.pos += 2;
                return Ok(self.fresh_blank());
            }
            _ => return self.error("expected term"),
        };
        Ok(VarOrTerm::Term(term))
    }

    fn rdf_literal(&mut self) -> PResult<Literal> {
        let string = self.next().expect("caller checked for a string token");
        match self.peek() {
            Some(t) if t.kind == TokenKind::LangTag => {
                let tag = t.value.clone();
                self.pos += 1;
                Ok(Literal::lang(string.value, tag))
            }
            Some(t) if t.is_punct("^^") => {
                self.pos += 1;
                let datatype = self.iri()?;
                Ok(Literal::typed(string.value, datatype))
            }
            _ => Ok(Literal::simple(string.value)),
        }
    }

    fn data_block(&mut self) -> PResult<InlineData> {
        let mut data = InlineData::default();
        if let Some(t) = self.peek().filter(|t| t.kind == TokenKind::Variable) {
            data.variables.push(t.value.clone());
            self.pos += 1;
            self.expect_punct("{")?;
            while !self.eat_punct("}") {
                let value = self.data_value()?;
                data.rows.push(vec![value]);
            }
            return Ok(data);
        }
        self.expect_punct("(")?;
        while !self.eat_punct(")") {
            data.variables.push(self.expect_variable()?);
        }
        self.expect_punct("{")?;
        while !self.eat_punct("}") {
            self.expect_punct("(")?;
            let mut row = Vec::new();
            while !self.eat_punct(")") {
                row.push(self.data_value()?);
            }
            if row.len() != data.variables.len() {
                return self.error(format!(
                    "VALUES row has {} values for {} variables",
                    row.len(),
                    data.variables.len()
                ));
            }
            data.rows.push(row);
        }
        Ok(data)
    }

    fn data_value(&mut self) -> PResult<Option<Term>> {
        if self.eat_keyword("UNDEF") {
            return Ok(None);
        }
        if self.peek().is_none() {
            return self.error("unterminated VALUES block");
        }
        match self.var_or_term()? {
            VarOrTerm::Term(term @ (Term::Iri(_) | Term::Literal(_))) => Ok(Some(term)),
            _ => {
                self.pos -= 1;
                self.error("VALUES accepts only IRIs, literals and UNDEF")
            }
        }
    }

    fn solution_modifiers(&mut self) -> PResult<SolutionModifiers> {
        let mut modifiers = SolutionModifiers::default();
        if self.eat_keyword("GROUP") {
            self.expect_keyword("BY")?;
            modifiers.group_by = Some(self.conditions(false)?);
        }
        if self.eat_keyword("HAVING") {
            let mut expression = Expression::default();
            while self.starts_constraint() {
                expression.parts.extend(self.constraint()?.parts);
            }
            if expression.is_empty() {
                return self.error("expected HAVING condition");
            }
            modifiers.having = Some(expression);
        }
        if self.eat_keyword("ORDER") {
            self.expect_keyword("BY")?;
            modifiers.order_by = Some(self.conditions(true)?);
        }
        loop {
            if self.eat_keyword("LIMIT") {
                if modifiers.limit.is_some() {
                    self.pos -= 1;
                    return self.error("duplicate LIMIT");
                }
                modifiers.limit = Some(self.integer()?);
            } else if self.eat_keyword("OFFSET") {
                if modifiers.offset.is_some() {
                    self.pos -= 1;
                    return self.error("duplicate OFFSET");
                }
                modifiers.offset = Some(self.integer()?);
            } else {
                return Ok(modifiers);
            }
        }
    }

    fn integer(&mut self) -> PResult<u64> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Number => match t.value.parse::<u64>() {
                Ok(n) => {
                    self.pos += 1;
                    Ok(n)
                }
                Err(_) => self.error("expected non-negative integer"),
            },
            _ => self.error("expected non-negative integer"),
        }
    }

    fn is_call_start(&self) -> bool {
        let (Some(head), Some(next)) = (self.peek(), self.peek_at(1)) else {
            return false;
        };
        if !next.is_punct("(") {
            return false;
        }
        match head.kind {
            TokenKind::Iri | TokenKind::PrefixedName => true,
            TokenKind::Keyword => !STRUCTURAL.iter().any(|k| head.is_keyword(k)),
            _ => false,
        }
    }

    fn starts_constraint(&self) -> bool {
        self.at_punct("(")
            || self.is_call_start()
            || self.at_keyword("EXISTS")
            || (self.at_keyword("NOT") && self.peek_at(1).is_some_and(|t| t.is_keyword("EXISTS")))
    }

    fn conditions(&mut self, order: bool) -> PResult<Expression> {
        let mut expression = Expression::default();
        while let Some(token) = self.peek().cloned() {
            if token.kind == TokenKind::Variable {
                self.pos += 1;
                expression.parts.push(ExprPart::Token(format!("?{}", token.value)));
            } else if order
                && (token.is_keyword("ASC") || token.is_keyword("DESC"))
                && self.peek_at(1).is_some_and(|t| t.is_punct("("))
            {
                self.pos += 1;
                expression.parts.push(ExprPart::Token(token.value.clone()));
                self.bracketted(&mut expression)?;
            } else if self.at_punct("(") || self.is_call_start() {
                expression.parts.extend(self.constraint()?.parts);
            } else {
                break;
            }
        }
        if expression.is_empty() {
            return self.error("expected condition");
        }
        Ok(expression)
    }

    fn constraint(&mut self) -> PResult<Expression> {
        let mut expression = Expression::default();
        if self.at_punct("(") {
            self.bracketted(&mut expression)?;
        } else if self.at_keyword("EXISTS") || self.at_keyword("NOT") {
            self.exists(&mut expression)?;
        } else if self.is_call_start() {
            let head = self.next().expect("call start checked");
            expression.parts.push(ExprPart::Token(self.expression_token(&head)?));
            self.bracketted(&mut expression)?;
        } else {
            return self.error("expected constraint");
        }
        Ok(expression)
    }

    fn exists(&mut self, expression: &mut Expression) -> PResult<()> {
        let negated = self.eat_keyword("NOT");
        self.expect_keyword("EXISTS")?;
        let (pattern, _) = self.group_graph_pattern()?;
        expression.parts.push(ExprPart::Exists { negated, pattern });
        Ok(())
    }

    /// Balanced `( ... )`, parentheses included.
    fn bracketted(&mut self, expression: &mut Expression) -> PResult<()> {
        self.expect_punct("(")?;
        expression.parts.push(ExprPart::Token("(".to_string()));
        let mut depth = 1usize;
        while depth > 0 {
            if self.at_punct("(") {
                depth += 1;
            } else if self.at_punct(")") {
                depth -= 1;
            }
            self.expression_part(expression)?;
        }
        Ok(())
    }

    /// Tokens up to an `AS` at nesting depth zero; consumes the `AS`.
    fn expression_until_as(&mut self) -> PResult<Expression> {
        let mut expression = Expression::default();
        let mut depth = 0usize;
        loop {
            if depth == 0 && self.eat_keyword("AS") {
                if expression.is_empty() {
                    self.pos -= 1;
                    return self.error("expected expression before AS");
                }
                return Ok(expression);
            }
            if self.at_punct("(") {
                depth += 1;
            } else if self.at_punct(")") {
                if depth == 0 {
                    return self.error("expected AS");
                }
                depth -= 1;
            }
            self.expression_part(&mut expression)?;
        }
    }

    fn expression_part(&mut self, expression: &mut Expression) -> PResult<()> {
        if self.at_keyword("EXISTS")
            || (self.at_keyword("NOT") && self.peek_at(1).is_some_and(|t| t.is_keyword("EXISTS")))
        {
            return self.exists(expression);
        }
        let Some(token) = self.peek().cloned() else {
            return self.error("unterminated expression");
        };
        if token.kind == TokenKind::String {
            let literal = self.rdf_literal()?;
            let datatype = if literal.language.is_none() && literal.datatype != vocab::XSD_STRING {
                // keep the datatype spelling the author used
                let dt_token = &self.tokens[self.pos - 1];
                Some(self.expression_token(&dt_token.clone())?)
            } else {
                None
            };
            let mut text = crate::rdf::writer::quote_string(&literal.lexical);
            if let Some(tag) = &literal.language {
                text.push('@');
                text.push_str(tag);
            }
            if let Some(dt) = datatype {
                text.push_str("^^");
                text.push_str(&dt);
            }
            expression.parts.push(ExprPart::Token(text));
            return Ok(());
        }
        if token.is_punct("{") || token.is_punct("}") {
            return self.error("unexpected brace in expression");
        }
        self.pos += 1;
        let text = self.expression_token(&token)?;
        expression.parts.push(ExprPart::Token(text));
        Ok(())
    }

    fn expression_token(&mut self, token: &Token) -> PResult<String> {
        Ok(match token.kind {
            TokenKind::Variable => format!("?{}", token.value),
            TokenKind::Iri => format!("<{}>", crate::rdf::writer::escape_iri(&self.resolve(&token.value))),
            TokenKind::PrefixedName => {
                let label = token.prefix_label().unwrap_or_default().to_string();
                self.lookup_prefix(&label, token)?;
                token.lexeme.clone()
            }
            TokenKind::Keyword if token.is_keyword("TRUE") || token.is_keyword("FALSE") => {
                token.value.to_ascii_lowercase()
            }
            TokenKind::Keyword | TokenKind::Number => token.value.clone(),
            TokenKind::BlankNode => format!("_:{}", token.value),
            TokenKind::Punctuation | TokenKind::PathOperator => token.lexeme.clone(),
            TokenKind::String | TokenKind::LangTag => {
                return Err(ParseError::Syntax {
                    line: token.line,
                    column: token.column,
                    message: "misplaced literal part".to_string(),
                    found: token.to_string(),
                })
            }
            TokenKind::NamedSet => {
                return Err(ParseError::Syntax {
                    line: token.line,
                    column: token.column,
                    message: "named subquery reference inside expression".to_string(),
                    found: token.to_string(),
                })
            }
        })
    }
}

fn numeric_literal(lexical: &str) -> Literal {
    let datatype = if lexical.contains(['e', 'E']) {
        vocab::XSD_DOUBLE
    } else if lexical.contains('.') {
        vocab::XSD_DECIMAL
    } else {
        vocab::XSD_INTEGER
    };
    Literal::typed(lexical, datatype)
}

fn unescape_local(local: &str) -> String {
    if !local.contains('\\') {
        return local.to_string();
    }
    let mut out = String::with_capacity(local.len());
    let mut chars = local.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            if let Some(n) = chars.next() {
                out.push(n);
            }
        } else {
            out.push(c);
        }
    }
    out
}
