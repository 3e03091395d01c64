use std::collections::BTreeSet;
use std::fmt;

use super::ast::*;
use super::token::{tokenize, TokenKind, TokenizeError};

/// Prefix labels bound by PREFIX directives and labels used by prefixed
/// names elsewhere. Works on token level, so queries that fail to parse
/// because of a missing prefix still get an answer.
pub fn used_prefixes(text: &str) -> Result<(BTreeSet<String>, BTreeSet<String>), TokenizeError> {
    let tokens = tokenize(text)?;
    let mut declared = BTreeSet::new();
    let mut used = BTreeSet::new();
    let mut after_prefix = false;
    for token in &tokens {
        if token.kind == TokenKind::PrefixedName {
            let label = token.prefix_label().unwrap_or_default().to_string();
            if after_prefix {
                declared.insert(label);
            } else {
                used.insert(label);
            }
        }
        after_prefix = token.is_keyword("PREFIX");
    }
    Ok((declared, used))
}

/// Labels used but not declared in the text.
pub fn undeclared_prefixes(text: &str) -> Result<BTreeSet<String>, TokenizeError> {
    let (declared, used) = used_prefixes(text)?;
    Ok(used.difference(&declared).cloned().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scope {
    #[default]
    AllGroups,
    TopLevelOnly,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Context {
    Optional,
    Union(usize),
    Graph(VarOrTerm),
    Service(VarOrTerm),
    Minus,
    SubSelect,
    NamedSubquery(String),
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Context::Optional => f.write_str("Optional"),
            Context::Union(branch) => write!(f, "Union[{branch}]"),
            Context::Graph(name) => write!(f, "Graph({name})"),
            Context::Service(endpoint) => write!(f, "Service({endpoint})"),
            Context::Minus => f.write_str("Minus"),
            Context::SubSelect => f.write_str("SubSelect"),
            Context::NamedSubquery(name) => write!(f, "NamedSubquery(%{name})"),
        }
    }
}

/// Nesting of a triple pattern, outermost first. Empty at top level.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ContextPath(pub Vec<Context>);

impl ContextPath {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains_optional(&self) -> bool {
        self.0.contains(&Context::Optional)
    }

    pub fn service(&self) -> Option<&VarOrTerm> {
        self.0.iter().rev().find_map(|c| match c {
            Context::Service(endpoint) => Some(endpoint),
            _ => None,
        })
    }
}

impl fmt::Display for ContextPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("→"))
    }
}

/// Triple patterns in document order. Plain nested groups and EXISTS
/// filters add no context entry; TopLevelOnly stops at every construct
/// that would add one.
pub fn extract_triple_patterns(query: &Query, scope: Scope) -> Vec<(TriplePattern, ContextPath)> {
    let mut out = Vec::new();
    let mut path = Vec::new();
    if scope == Scope::AllGroups {
        for named in &query.named_subqueries {
            path.push(Context::NamedSubquery(named.name.clone()));
            walk_query(&named.query, scope, &mut path, &mut out);
            path.pop();
        }
    }
    walk_query(query, scope, &mut path, &mut out);
    out
}

fn walk_query(query: &Query, scope: Scope, path: &mut Vec<Context>, out: &mut Vec<(TriplePattern, ContextPath)>) {
    if let Some(group) = &query.where_clause {
        walk_group(group, scope, path, out);
    }
}

fn walk_group(group: &GroupPattern, scope: Scope, path: &mut Vec<Context>, out: &mut Vec<(TriplePattern, ContextPath)>) {
    let all = scope == Scope::AllGroups;
    for element in &group.elements {
        let nested = |ctx: Context, inner: &GroupPattern, path: &mut Vec<Context>, out: &mut Vec<_>| {
            if all {
                path.push(ctx);
                walk_group(inner, scope, path, out);
                path.pop();
            }
        };
        match element {
            GroupElement::Bgp(triples) => {
                for triple in triples {
                    out.push((triple.clone(), ContextPath(path.clone())));
                }
            }
            GroupElement::Group(inner) => walk_group(inner, scope, path, out),
            GroupElement::Optional(inner) => nested(Context::Optional, inner, path, out),
            GroupElement::Minus(inner) => nested(Context::Minus, inner, path, out),
            GroupElement::Union(branches) => {
                for (index, branch) in branches.iter().enumerate() {
                    nested(Context::Union(index), branch, path, out);
                }
            }
            GroupElement::Graph { name, pattern } => nested(Context::Graph(name.clone()), pattern, path, out),
            GroupElement::Service { endpoint, pattern, .. } => {
                nested(Context::Service(endpoint.clone()), pattern, path, out)
            }
            GroupElement::SubSelect(query) => {
                if all {
                    path.push(Context::SubSelect);
                    walk_query(query, scope, path, out);
                    path.pop();
                }
            }
            GroupElement::Filter(expression) | GroupElement::Bind { expression, .. } => {
                if all {
                    for part in &expression.parts {
                        if let ExprPart::Exists { pattern, .. } = part {
                            walk_group(pattern, scope, path, out);
                        }
                    }
                }
            }
            GroupElement::Values(_) | GroupElement::NamedInclude(_) => {}
        }
    }
}

pub fn count_triple_patterns(query: &Query) -> usize {
    extract_triple_patterns(query, Scope::AllGroups).len()
}

/// SERVICE targets in document order, once per occurrence.
pub fn service_endpoints(query: &Query) -> Vec<VarOrTerm> {
    let mut out = Vec::new();
    for named in &query.named_subqueries {
        services_in_query(&named.query, &mut out);
    }
    services_in_query(query, &mut out);
    out
}

fn services_in_query(query: &Query, out: &mut Vec<VarOrTerm>) {
    if let Some(group) = &query.where_clause {
        services_in_group(group, out);
    }
}

fn services_in_group(group: &GroupPattern, out: &mut Vec<VarOrTerm>) {
    for element in &group.elements {
        match element {
            GroupElement::Service { endpoint, pattern, .. } => {
                out.push(endpoint.clone());
                services_in_group(pattern, out);
            }
            GroupElement::Group(inner)
            | GroupElement::Optional(inner)
            | GroupElement::Minus(inner)
            | GroupElement::Graph { pattern: inner, .. } => services_in_group(inner, out),
            GroupElement::Union(branches) => branches.iter().for_each(|b| services_in_group(b, out)),
            GroupElement::SubSelect(query) => services_in_query(query, out),
            GroupElement::Filter(expression) | GroupElement::Bind { expression, .. } => {
                for part in &expression.parts {
                    if let ExprPart::Exists { pattern, .. } = part {
                        services_in_group(pattern, out);
                    }
                }
            }
            GroupElement::Bgp(_) | GroupElement::Values(_) | GroupElement::NamedInclude(_) => {}
        }
    }
}

pub fn is_federated(query: &Query) -> bool {
    !service_endpoints(query).is_empty()
}

/// Copy with the top-level LIMIT lowered to `n`; sub-select limits are
/// left alone.
pub fn with_limit(query: &Query, n: u64) -> Query {
    let mut copy = query.clone();
    copy.modifiers.limit = Some(copy.modifiers.limit.map_or(n, |existing| existing.min(n)));
    copy
}
