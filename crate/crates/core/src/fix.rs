//! Rewrites towards portable SPARQL 1.1: named-subquery inlining, query
//! hint removal and missing-prefix injection.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::Serialize;

use crate::rdf::{PrefixMap, Term};
use crate::sparql::{
    parse_query, serialize_query, tokenize, used_prefixes, Dialect, ExprPart, GroupElement, GroupPattern,
    ParseError, Predicate, Query, SerializeError, TokenKind, TokenizeError, TriplePattern, VarOrTerm,
};

pub const BLAZEGRAPH_HINTS: &str = "http://www.bigdata.com/queryHints#";
pub const NEPTUNE_HINTS: &str = "http://aws.amazon.com/neptune/vocab/v01/QueryHints#";

pub fn default_hint_namespaces() -> Vec<String> {
    vec![BLAZEGRAPH_HINTS.to_string(), NEPTUNE_HINTS.to_string()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FixKind {
    NamedSubquery,
    HintTriples,
    PrefixInjection,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AppliedFix {
    pub fix: FixKind,
    pub detail: String,
    pub count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FixReport {
    pub applied: Vec<AppliedFix>,
    /// Undeclared labels missing from the registry.
    pub unresolved_prefixes: Vec<String>,
    pub warnings: Vec<String>,
}

impl FixReport {
    pub fn changed(&self) -> bool {
        !self.applied.is_empty()
    }

    pub fn count(&self, fix: FixKind) -> usize {
        self.applied.iter().filter(|a| a.fix == fix).map(|a| a.count).sum()
    }

    fn extend(&mut self, other: FixReport) {
        self.applied.extend(other.applied);
        for label in other.unresolved_prefixes {
            if !self.unresolved_prefixes.contains(&label) {
                self.unresolved_prefixes.push(label);
            }
        }
        self.warnings.extend(other.warnings);
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FixError {
    #[error(transparent)]
    Tokenize(#[from] TokenizeError),
    #[error("INCLUDE %{0} refers to an undeclared named subquery")]
    UndeclaredNamedSet(String),
    #[error("named subquery %{0} is declared twice")]
    DuplicateNamedSet(String),
    #[error("named subquery %{0} includes itself")]
    CyclicNamedSet(String),
    #[error("malformed named subquery declaration at {line}:{column}")]
    MalformedDeclaration { line: usize, column: usize },
    #[error("query still does not parse: {0}")]
    Unparsable(ParseError),
    #[error(transparent)]
    Serialize(#[from] SerializeError),
}

struct Declaration {
    /// Whole `WITH { ... } AS %name` text.
    span: Range<usize>,
    /// Text between the braces.
    body: Range<usize>,
}

struct Include {
    name: String,
    span: Range<usize>,
}

/// Removes every `WITH { ... } AS %n` and replaces each `INCLUDE %n`
/// with `{ ... }` holding the sub-select. Text without named subqueries
/// comes back unchanged.
pub fn rewrite_named_subqueries(text: &str) -> Result<(String, FixReport), FixError> {
    let tokens = tokenize(text)?;
    let mut declarations: BTreeMap<String, Declaration> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut includes: Vec<Include> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let token = &tokens[i];
        if token.is_keyword("WITH") && tokens.get(i + 1).is_some_and(|t| t.is_punct("{")) {
            let open = i + 1;
            let mut depth = 0usize;
            let mut close = None;
            for (j, t) in tokens.iter().enumerate().skip(open) {
                if t.is_punct("{") {
                    depth += 1;
                } else if t.is_punct("}") {
                    depth -= 1;
                    if depth == 0 {
                        close = Some(j);
                        break;
                    }
                }
            }
            let malformed = FixError::MalformedDeclaration {
                line: token.line,
                column: token.column,
            };
            let close = close.ok_or(malformed.clone())?;
            let (Some(as_kw), Some(name)) = (tokens.get(close + 1), tokens.get(close + 2)) else {
                return Err(malformed);
            };
            if !as_kw.is_keyword("AS") || name.kind != TokenKind::NamedSet {
                return Err(malformed);
            }
            if declarations.contains_key(&name.value) {
                return Err(FixError::DuplicateNamedSet(name.value.clone()));
            }
            declarations.insert(
                name.value.clone(),
                Declaration {
                    span: token.start..name.end,
                    body: tokens[open].end..tokens[close].start,
                },
            );
            order.push(name.value.clone());
            // includes inside the body are picked up by the main scan
            i = open + 1;
            continue;
        }
        if token.is_keyword("INCLUDE") {
            if let Some(name) = tokens.get(i + 1).filter(|t| t.kind == TokenKind::NamedSet) {
                includes.push(Include {
                    name: name.value.clone(),
                    span: token.start..name.end,
                });
                i += 2;
                continue;
            }
        }
        i += 1;
    }

    if declarations.is_empty() && includes.is_empty() {
        return Ok((text.to_string(), FixReport::default()));
    }
    for include in &includes {
        if !declarations.contains_key(&include.name) {
            return Err(FixError::UndeclaredNamedSet(include.name.clone()));
        }
    }

    let mut report = FixReport::default();
    let inliner = Inliner {
        text,
        declarations: &declarations,
        includes: &includes,
    };
    let top = 0..text.len();
    let mut stack = Vec::new();
    let mut sites: BTreeMap<&str, usize> = BTreeMap::new();
    let output = inliner.render(top, true, &mut stack, &mut sites)?;

    for name in &order {
        match sites.get(name.as_str()) {
            Some(&count) => report.applied.push(AppliedFix {
                fix: FixKind::NamedSubquery,
                detail: format!("inlined %{name} at {count} site(s)"),
                count,
            }),
            None => {
                report.warnings.push(format!("named subquery %{name} is never included; declaration dropped"));
                report.applied.push(AppliedFix {
                    fix: FixKind::NamedSubquery,
                    detail: format!("dropped unused %{name}"),
                    count: 0,
                });
            }
        }
    }
    Ok((tidy(&output), report))
}

struct Inliner<'a> {
    text: &'a str,
    declarations: &'a BTreeMap<String, Declaration>,
    includes: &'a [Include],
}

impl<'a> Inliner<'a> {
    /// Copies `range`, dropping declarations (top level only) and
    /// expanding the includes in it. Includes inside a dropped declaration
    /// are skipped along with it.
    fn render(
        &self,
        range: Range<usize>,
        top: bool,
        stack: &mut Vec<&'a str>,
        sites: &mut BTreeMap<&'a str, usize>,
    ) -> Result<String, FixError> {
        let mut cuts: Vec<(Range<usize>, Option<&'a str>)> = Vec::new();
        if top {
            for declaration in self.declarations.values() {
                cuts.push((declaration.span.clone(), None));
            }
        }
        for include in self.includes {
            if include.span.start < range.start || include.span.end > range.end {
                continue;
            }
            cuts.push((include.span.clone(), Some(include.name.as_str())));
        }
        cuts.sort_by_key(|(span, _)| span.start);

        let mut out = String::new();
        let mut cursor = range.start;
        for (span, include) in cuts {
            if span.start < cursor {
                continue;
            }
            out.push_str(&self.text[cursor..span.start]);
            if let Some(name) = include {
                if stack.contains(&name) {
                    return Err(FixError::CyclicNamedSet(name.to_string()));
                }
                let (key, declaration) = self
                    .declarations
                    .get_key_value(name)
                    .expect("includes were checked against declarations");
                stack.push(key.as_str());
                let body = self.render(declaration.body.clone(), false, stack, sites)?;
                stack.pop();
                *sites.entry(key.as_str()).or_default() += 1;
                out.push_str("{ ");
                out.push_str(body.trim());
                out.push_str(" }");
            }
            cursor = span.end;
        }
        out.push_str(&self.text[cursor..range.end]);
        Ok(out)
    }
}

/// Drops lines left blank by removed declarations and trailing spaces.
fn tidy(text: &str) -> String {
    let mut out = Vec::new();
    let mut blank_run = 0;
    for line in text.lines() {
        let line = line.trim_end();
        if line.is_empty() {
            blank_run += 1;
            if blank_run > 1 {
                continue;
            }
        } else {
            blank_run = 0;
        }
        out.push(line);
    }
    while out.last().is_some_and(|l| l.is_empty()) {
        out.pop();
    }
    let mut joined = out.join("\n");
    if text.ends_with('\n') {
        joined.push('\n');
    }
    joined
}

/// Removes triple patterns whose subject or predicate IRI lies in one of
/// `namespaces`, in every nested group.
pub fn strip_query_hints(query: &Query, namespaces: &[String]) -> (Query, FixReport) {
    let mut copy = query.clone();
    let mut removed = 0usize;
    let mut emptied = 0usize;
    let is_hint = |iri: &str| namespaces.iter().any(|ns| !ns.is_empty() && iri.starts_with(ns.as_str()));
    strip_query(&mut copy, &is_hint, &mut removed, &mut emptied);
    let mut report = FixReport::default();
    if removed > 0 {
        report.applied.push(AppliedFix {
            fix: FixKind::HintTriples,
            detail: format!("removed {removed} query hint triple(s)"),
            count: removed,
        });
    }
    if emptied > 0 {
        report
            .warnings
            .push(format!("{emptied} group(s) held only query hints and are now empty"));
    }
    (copy, report)
}

fn strip_query(query: &mut Query, is_hint: &dyn Fn(&str) -> bool, removed: &mut usize, emptied: &mut usize) {
    for named in &mut query.named_subqueries {
        strip_query(&mut named.query, is_hint, removed, emptied);
    }
    if let Some(group) = &mut query.where_clause {
        strip_group(group, is_hint, removed, emptied);
    }
}

fn triple_is_hint(triple: &TriplePattern, is_hint: &dyn Fn(&str) -> bool) -> bool {
    let subject = matches!(&triple.subject, VarOrTerm::Term(Term::Iri(iri)) if is_hint(iri));
    let predicate = matches!(&triple.predicate, Predicate::Path(_)) && triple.predicate.link().is_some_and(is_hint);
    subject || predicate
}

fn strip_group(group: &mut GroupPattern, is_hint: &dyn Fn(&str) -> bool, removed: &mut usize, emptied: &mut usize) {
    let had_elements = !group.elements.is_empty();
    for element in &mut group.elements {
        match element {
            GroupElement::Bgp(triples) => {
                let before = triples.len();
                triples.retain(|t| !triple_is_hint(t, is_hint));
                *removed += before - triples.len();
            }
            GroupElement::Group(inner)
            | GroupElement::Optional(inner)
            | GroupElement::Minus(inner)
            | GroupElement::Graph { pattern: inner, .. }
            | GroupElement::Service { pattern: inner, .. } => strip_group(inner, is_hint, removed, emptied),
            GroupElement::Union(branches) => {
                for branch in branches {
                    strip_group(branch, is_hint, removed, emptied);
                }
            }
            GroupElement::SubSelect(query) => strip_query(query, is_hint, removed, emptied),
            GroupElement::Filter(expression) | GroupElement::Bind { expression, .. } => {
                for part in &mut expression.parts {
                    if let ExprPart::Exists { pattern, .. } = part {
                        strip_group(pattern, is_hint, removed, emptied);
                    }
                }
            }
            GroupElement::Values(_) | GroupElement::NamedInclude(_) => {}
        }
    }
    group
        .elements
        .retain(|e| !matches!(e, GroupElement::Bgp(triples) if triples.is_empty()));
    if had_elements && group.elements.is_empty() {
        *emptied += 1;
    }
}

/// Prepends PREFIX lines, sorted by label, for labels used but not
/// declared that `registry` knows.
pub fn inject_prefixes(text: &str, registry: &PrefixMap) -> Result<(String, FixReport), FixError> {
    let (declared, used) = used_prefixes(text)?;
    let mut report = FixReport::default();
    let mut header = String::new();
    let mut added = Vec::new();
    for label in used.difference(&declared) {
        match registry.get(label) {
            Some(ns) => {
                header.push_str(&format!("PREFIX {label}: <{ns}>\n"));
                added.push(label.clone());
            }
            None => report.unresolved_prefixes.push(label.clone()),
        }
    }
    if added.is_empty() {
        return Ok((text.to_string(), report));
    }
    report.applied.push(AppliedFix {
        fix: FixKind::PrefixInjection,
        detail: format!("added PREFIX for {}", added.join(", ")),
        count: added.len(),
    });
    header.push_str(text);
    Ok((header, report))
}

/// Named-subquery rewrite, then parse (injecting prefixes first when the
/// parse fails on an undeclared one), then hint removal. The text is only
/// re-serialized when hints were removed, so compliant input is returned
/// untouched and repeated runs are stable.
pub fn fix_all(text: &str, registry: &PrefixMap, hint_namespaces: &[String]) -> Result<(String, FixReport), FixError> {
    let (mut current, mut report) = rewrite_named_subqueries(text)?;
    let query = match parse_query(&current, None, Dialect::Extended) {
        Ok(query) => query,
        Err(e) if e.is_undeclared_prefix() => {
            let (injected, r) = inject_prefixes(&current, registry)?;
            current = injected;
            report.extend(r);
            parse_query(&current, None, Dialect::Extended).map_err(FixError::Unparsable)?
        }
        Err(e) => return Err(FixError::Unparsable(e)),
    };
    let (stripped, r) = strip_query_hints(&query, hint_namespaces);
    if r.changed() {
        current = serialize_query(&stripped)?;
    }
    report.extend(r);
    Ok((current, report))
}
