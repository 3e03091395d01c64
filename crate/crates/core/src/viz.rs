//! Query graphs, Mermaid diagrams and Markdown example pages.
//!
//! Node ids: `v_<name>` for variables, `n_<prefix>_<local>` for IRIs
//! (the sanitized prefixed form, or the sanitized IRI when no prefix
//! applies), `l_<k>` for literals, `b_<label>` for blank nodes and
//! `p_<k>` for path intermediates. Characters outside `[A-Za-z0-9_]`
//! become `_`; a clash gets `_2`, `_3`, ... appended.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write;

use serde::Serialize;

use crate::rdf::{vocab, PrefixMap, Term};
use crate::sparql::{
    expression_text, extract_triple_patterns, parse_query, path_text, term_text, DescribeTargets, Dialect,
    ExprPart, Expression, GroupElement, GroupPattern, Predicate, Projection, PropertyPath, Query, QueryForm, Scope,
    VarOrTerm,
};
use crate::store::QueryExample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Variable,
    Iri,
    Literal,
    Blank,
    PathIntermediate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub label: String,
    pub projected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub label: String,
    /// 1-based, dense, in pattern order.
    pub index: usize,
    /// Nesting as `Optional`, `Service(<...>)→Optional`, ...; empty at top level.
    pub context: String,
    pub optional: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct QueryGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl QueryGraph {
    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }
}

struct Builder<'a> {
    prefixes: &'a PrefixMap,
    graph: QueryGraph,
    ids: HashMap<VarOrTerm, String>,
    taken: HashSet<String>,
    literals: usize,
    intermediates: usize,
}

impl Builder<'_> {
    fn unique(&mut self, base: String) -> String {
        let mut candidate = base.clone();
        let mut n = 2;
        while self.taken.contains(&candidate) {
            candidate = format!("{base}_{n}");
            n += 1;
        }
        self.taken.insert(candidate.clone());
        candidate
    }

    fn iri_label(&self, iri: &str) -> String {
        match self.prefixes.compact(iri) {
            Some((label, local)) => format!("{label}:{local}"),
            None => iri.to_string(),
        }
    }

    fn node(&mut self, value: &VarOrTerm) -> String {
        if let Some(id) = self.ids.get(value) {
            return id.clone();
        }
        let (base, kind, label) = match value {
            VarOrTerm::Variable(name) => (format!("v_{}", sanitize(name)), NodeKind::Variable, format!("?{name}")),
            VarOrTerm::Term(Term::Iri(iri)) => {
                let label = self.iri_label(iri);
                (format!("n_{}", sanitize(&label)), NodeKind::Iri, label)
            }
            VarOrTerm::Term(Term::Literal(_)) => {
                self.literals += 1;
                let label = match value {
                    VarOrTerm::Term(term) => term_text(term, self.prefixes),
                    VarOrTerm::Variable(_) => unreachable!(),
                };
                (format!("l_{}", self.literals), NodeKind::Literal, label)
            }
            VarOrTerm::Term(Term::BlankNode(b)) => (format!("b_{}", sanitize(b)), NodeKind::Blank, format!("_:{b}")),
        };
        let id = self.unique(base);
        self.graph.nodes.push(Node {
            id: id.clone(),
            kind,
            label,
            projected: false,
        });
        self.ids.insert(value.clone(), id.clone());
        id
    }

    fn intermediate(&mut self) -> String {
        self.intermediates += 1;
        let id = self.unique(format!("p_{}", self.intermediates));
        self.graph.nodes.push(Node {
            id: id.clone(),
            kind: NodeKind::PathIntermediate,
            label: String::new(),
            projected: false,
        });
        id
    }

    fn edge(&mut self, from: String, to: String, label: String, context: &str, optional: bool) {
        let index = self.graph.edges.len() + 1;
        self.graph.edges.push(Edge {
            from,
            to,
            label,
            index,
            context: context.to_string(),
            optional,
        });
    }

    /// One path step between two nodes; `Inverse(Link)` flips the edge.
    fn step(&mut self, path: &PropertyPath, from: String, to: String, context: &str, optional: bool) {
        match path {
            PropertyPath::Link(iri) => {
                let label = if iri == vocab::RDF_TYPE { "a".to_string() } else { self.iri_label(iri) };
                self.edge(from, to, label, context, optional);
            }
            PropertyPath::Inverse(inner) if matches!(**inner, PropertyPath::Link(_)) => {
                self.step(inner, to, from, context, optional);
            }
            other => {
                let label = path_text(other, self.prefixes);
                self.edge(from, to, label, context, optional);
            }
        }
    }
}

pub fn sanitize(text: &str) -> String {
    text.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

/// Variables a query returns: the SELECT list, every pattern variable for
/// `SELECT *`, the variable targets of DESCRIBE.
fn projected_variables(query: &Query) -> BTreeSet<String> {
    match &query.form {
        QueryForm::Select(select) => match &select.projection {
            Projection::Items(items) => items.iter().map(|i| i.variable().to_string()).collect(),
            Projection::Star => in_scope_variables(query),
        },
        QueryForm::Describe(DescribeTargets::Terms(terms)) => {
            terms.iter().filter_map(|t| t.as_variable().map(str::to_string)).collect()
        }
        QueryForm::Describe(DescribeTargets::Star) => in_scope_variables(query),
        _ => BTreeSet::new(),
    }
}

fn in_scope_variables(query: &Query) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for (pattern, _) in extract_triple_patterns(query, Scope::AllGroups) {
        for value in [&pattern.subject, &pattern.object] {
            if let VarOrTerm::Variable(v) = value {
                out.insert(v.clone());
            }
        }
        if let Predicate::Variable(v) = &pattern.predicate {
            out.insert(v.clone());
        }
    }
    out
}

pub fn build_query_graph(query: &Query) -> QueryGraph {
    let prefixes = query.prologue.effective_prefixes();
    let mut builder = Builder {
        prefixes: &prefixes,
        graph: QueryGraph::default(),
        ids: HashMap::new(),
        taken: HashSet::new(),
        literals: 0,
        intermediates: 0,
    };
    for (pattern, context) in extract_triple_patterns(query, Scope::AllGroups) {
        let optional = context.contains_optional();
        let context_text = context.to_string();
        let from = builder.node(&pattern.subject);
        let to = builder.node(&pattern.object);
        match &pattern.predicate {
            Predicate::Variable(v) => builder.edge(from, to, format!("?{v}"), &context_text, optional),
            Predicate::Path(PropertyPath::Sequence(members)) => {
                let mut current = from;
                for (i, member) in members.iter().enumerate() {
                    let next = if i + 1 == members.len() { to.clone() } else { builder.intermediate() };
                    builder.step(member, current, next.clone(), &context_text, optional);
                    current = next;
                }
            }
            Predicate::Path(path) => builder.step(path, from, to, &context_text, optional),
        }
    }
    let projected = projected_variables(query);
    for node in &mut builder.graph.nodes {
        if node.kind == NodeKind::Variable && projected.contains(&node.label[1..]) {
            node.projected = true;
        }
    }
    builder.graph
}

fn mermaid_text(text: &str) -> String {
    text.replace('"', "#quot;")
}

/// `graph TD` flowchart: variables and IRIs as boxes, literals quoted,
/// blank nodes and path intermediates as small circles, optional edges
/// dotted, projected variables in the `projected` class.
pub fn emit_mermaid(graph: &QueryGraph) -> String {
    let mut out = String::from("graph TD\n");
    for node in &graph.nodes {
        let _ = match node.kind {
            NodeKind::Blank | NodeKind::PathIntermediate => writeln!(out, "  {}((\" \"))", node.id),
            _ => writeln!(out, "  {}[\"{}\"]", node.id, mermaid_text(&node.label)),
        };
    }
    for edge in &graph.edges {
        let text = mermaid_text(&format!("({}) {}", edge.index, edge.label));
        let _ = if edge.optional {
            writeln!(out, "  {} -. \"{text}\" .-> {}", edge.from, edge.to)
        } else {
            writeln!(out, "  {} -- \"{text}\" --> {}", edge.from, edge.to)
        };
    }
    let projected: Vec<&str> = graph.nodes.iter().filter(|n| n.projected).map(|n| n.id.as_str()).collect();
    if !projected.is_empty() {
        out.push_str("  classDef projected fill:#c6efce,stroke:#2e7d32,color:#000\n");
        let _ = writeln!(out, "  class {} projected", projected.join(","));
    }
    out
}

fn annotations(query: &Query, prefixes: &PrefixMap) -> Vec<String> {
    fn walk(group: &GroupPattern, prefixes: &PrefixMap, out: &mut Vec<String>) {
        for element in &group.elements {
            match element {
                GroupElement::Filter(e) => {
                    out.push(format!("FILTER {}", expression_text(e, prefixes)));
                    nested(e, prefixes, out);
                }
                GroupElement::Bind { expression, variable } => {
                    out.push(format!("BIND({} AS ?{variable})", expression_text(expression, prefixes)));
                    nested(expression, prefixes, out);
                }
                GroupElement::Group(g)
                | GroupElement::Optional(g)
                | GroupElement::Minus(g)
                | GroupElement::Graph { pattern: g, .. }
                | GroupElement::Service { pattern: g, .. } => walk(g, prefixes, out),
                GroupElement::Union(branches) => branches.iter().for_each(|b| walk(b, prefixes, out)),
                GroupElement::SubSelect(q) => {
                    if let Some(g) = &q.where_clause {
                        walk(g, prefixes, out);
                    }
                }
                GroupElement::Bgp(_) | GroupElement::Values(_) | GroupElement::NamedInclude(_) => {}
            }
        }
    }
    fn nested(expression: &Expression, prefixes: &PrefixMap, out: &mut Vec<String>) {
        for part in &expression.parts {
            if let ExprPart::Exists { pattern, .. } = part {
                walk(pattern, prefixes, out);
            }
        }
    }
    let mut out = Vec::new();
    for named in &query.named_subqueries {
        if let Some(g) = &named.query.where_clause {
            walk(g, prefixes, &mut out);
        }
    }
    if let Some(g) = &query.where_clause {
        walk(g, prefixes, &mut out);
    }
    out
}

fn fence(text: &str) -> String {
    let mut ticks = 3;
    while text.contains(&"`".repeat(ticks)) {
        ticks += 1;
    }
    "`".repeat(ticks)
}

/// Markdown page for one example. `fallback` supplies prefixes the query
/// leaves undeclared.
pub fn emit_markdown_page(ex: &QueryExample, fallback: Option<&PrefixMap>) -> String {
    let mut out = String::new();
    let ordered = ex.ordered_questions();
    let title = ordered.first().map_or(ex.id.as_str(), |q| q.text.as_str());
    let _ = writeln!(out, "# {}\n", title.replace('\n', " "));
    if ordered.len() > 1 {
        out.push_str("Other languages:\n\n");
        for q in &ordered[1..] {
            let _ = writeln!(out, "- ({}) {}", q.lang.as_deref().unwrap_or("none"), q.text.replace('\n', " "));
        }
        out.push('\n');
    }
    let _ = writeln!(out, "Id: `{}`\n", ex.id);
    if !ex.targets.is_empty() {
        let links: Vec<String> = ex.targets.iter().map(|t| format!("[{t}]({t})")).collect();
        let _ = writeln!(out, "Endpoints: {}\n", links.join(", "));
    }
    if !ex.keywords.is_empty() {
        let keywords: Vec<String> = ex.keywords.iter().map(|k| format!("`{k}`")).collect();
        let _ = writeln!(out, "Keywords: {}\n", keywords.join(", "));
    }
    match parse_query(&ex.query_text, fallback, Dialect::Extended) {
        Ok(query) => {
            let graph = build_query_graph(&query);
            let _ = writeln!(out, "```mermaid\n{}```\n", emit_mermaid(&graph));
            let notes = annotations(&query, &query.prologue.effective_prefixes());
            if !notes.is_empty() {
                out.push_str("Filters and bindings:\n\n");
                for note in notes {
                    let _ = writeln!(out, "- `{}`", note.replace('\n', " ").replace('`', "'"));
                }
                out.push('\n');
            }
        }
        Err(e) => {
            let _ = writeln!(out, "> diagram unavailable: {}\n", e.to_string().replace('\n', " "));
        }
    }
    let ticks = fence(&ex.query_text);
    let _ = writeln!(out, "{ticks}sparql\n{}\n{ticks}", ex.query_text.trim_end());
    out
}
