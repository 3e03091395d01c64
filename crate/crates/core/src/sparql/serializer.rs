//! Canonical SPARQL text output.

use std::fmt::Write;

use super::ast::*;
use crate::rdf::writer::{escape_iri, is_bare_literal, quote_string};
use crate::rdf::{vocab, Literal, PrefixMap, Term};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SerializeError {
    #[error("query still contains named subqueries (WITH ... AS %{0} / INCLUDE); rewrite them first")]
    NonCompliant(String),
}

/// Writes the query with upper-case keywords, two-space indentation and
/// IRIs compacted through the declared and injected prefixes.
pub fn serialize_query(query: &Query) -> Result<String, SerializeError> {
    if let Some(named) = query.named_subqueries.first() {
        return Err(SerializeError::NonCompliant(named.name.clone()));
    }
    let prefixes = query.prologue.effective_prefixes();
    let mut out = String::new();
    if let Some(base) = &query.prologue.base {
        let _ = writeln!(out, "BASE <{}>", escape_iri(base));
    }
    for (label, ns) in prefixes.iter() {
        let _ = writeln!(out, "PREFIX {label}: <{}>", escape_iri(ns));
    }
    let writer = Writer { prefixes: &prefixes };
    writer.query(query, 0, &mut out)?;
    Ok(out)
}

/// Surface text of a property path, IRIs compacted through `prefixes`.
pub fn path_text(path: &PropertyPath, prefixes: &PrefixMap) -> String {
    Writer { prefixes }.path(path, 0)
}

/// Expression text on one line where possible; EXISTS groups span lines.
pub fn expression_text(expression: &Expression, prefixes: &PrefixMap) -> String {
    Writer { prefixes }
        .expression(expression, 0)
        .unwrap_or_else(|e| e.to_string())
}

pub fn term_text(term: &Term, prefixes: &PrefixMap) -> String {
    Writer { prefixes }.term(term)
}

struct Writer<'a> {
    prefixes: &'a PrefixMap,
}

fn pad(indent: usize) -> String {
    "  ".repeat(indent)
}

impl Writer<'_> {
    fn query(&self, query: &Query, indent: usize, out: &mut String) -> Result<(), SerializeError> {
        let p = pad(indent);
        match &query.form {
            QueryForm::Select(select) => {
                let mut line = String::from("SELECT");
                match select.modifier {
                    Some(SelectModifier::Distinct) => line.push_str(" DISTINCT"),
                    Some(SelectModifier::Reduced) => line.push_str(" REDUCED"),
                    None => {}
                }
                match &select.projection {
                    Projection::Star => line.push_str(" *"),
                    Projection::Items(items) => {
                        for item in items {
                            line.push(' ');
                            match item {
                                ProjectionItem::Variable(v) => {
                                    line.push('?');
                                    line.push_str(v);
                                }
                                ProjectionItem::Expression { expression, alias } => {
                                    let _ = write!(line, "({} AS ?{alias})", self.expression(expression, indent)?);
                                }
                            }
                        }
                    }
                }
                let _ = writeln!(out, "{p}{line}");
            }
            QueryForm::Ask => {
                let _ = writeln!(out, "{p}ASK");
            }
            QueryForm::Construct(template) => {
                let _ = writeln!(out, "{p}CONSTRUCT {{");
                for triple in template {
                    let _ = writeln!(out, "{}{}", pad(indent + 1), self.triple(triple));
                }
                let _ = writeln!(out, "{p}}}");
            }
            QueryForm::Describe(targets) => {
                let rendered = match targets {
                    DescribeTargets::Star => "*".to_string(),
                    DescribeTargets::Terms(terms) => {
                        terms.iter().map(|t| self.var_or_term(t)).collect::<Vec<_>>().join(" ")
                    }
                };
                let _ = writeln!(out, "{p}DESCRIBE {rendered}");
            }
        }
        for clause in &query.dataset {
            let named = if clause.named { "NAMED " } else { "" };
            let _ = writeln!(out, "{p}FROM {named}{}", self.iri(&clause.iri));
        }
        if let Some(group) = &query.where_clause {
            let _ = write!(out, "{p}WHERE ");
            self.group(group, indent, out)?;
            out.push('\n');
        }
        let modifiers = &query.modifiers;
        if let Some(group_by) = &modifiers.group_by {
            let _ = writeln!(out, "{p}GROUP BY {}", self.expression(group_by, indent)?);
        }
        if let Some(having) = &modifiers.having {
            let _ = writeln!(out, "{p}HAVING {}", self.expression(having, indent)?);
        }
        if let Some(order_by) = &modifiers.order_by {
            let _ = writeln!(out, "{p}ORDER BY {}", self.expression(order_by, indent)?);
        }
        if let Some(limit) = modifiers.limit {
            let _ = writeln!(out, "{p}LIMIT {limit}");
        }
        if let Some(offset) = modifiers.offset {
            let _ = writeln!(out, "{p}OFFSET {offset}");
        }
        if let Some(values) = &query.values {
            let _ = write!(out, "{p}VALUES ");
            self.values(values, indent, out);
            out.push('\n');
        }
        Ok(())
    }

    /// Writes `{ ... }`; the opening brace continues the current line and
    /// no newline follows the closing brace.
    fn group(&self, group: &GroupPattern, indent: usize, out: &mut String) -> Result<(), SerializeError> {
        if group.elements.is_empty() {
            out.push_str("{ }");
            return Ok(());
        }
        out.push_str("{\n");
        for element in &group.elements {
            self.element(element, indent + 1, out)?;
        }
        let _ = write!(out, "{}}}", pad(indent));
        Ok(())
    }

    fn element(&self, element: &GroupElement, indent: usize, out: &mut String) -> Result<(), SerializeError> {
        let p = pad(indent);
        match element {
            GroupElement::Bgp(triples) => {
                for triple in triples {
                    let _ = writeln!(out, "{p}{}", self.triple(triple));
                }
                return Ok(());
            }
            GroupElement::Group(group) => {
                out.push_str(&p);
                self.group(group, indent, out)?;
            }
            GroupElement::Optional(group) => {
                let _ = write!(out, "{p}OPTIONAL ");
                self.group(group, indent, out)?;
            }
            GroupElement::Minus(group) => {
                let _ = write!(out, "{p}MINUS ");
                self.group(group, indent, out)?;
            }
            GroupElement::Union(branches) => {
                for (index, branch) in branches.iter().enumerate() {
                    if index > 0 {
                        let _ = writeln!(out, "\n{p}UNION");
                    }
                    out.push_str(&p);
                    self.group(branch, indent, out)?;
                }
            }
            GroupElement::Graph { name, pattern } => {
                let _ = write!(out, "{p}GRAPH {} ", self.var_or_term(name));
                self.group(pattern, indent, out)?;
            }
            GroupElement::Service {
                endpoint,
                silent,
                pattern,
            } => {
                let silent = if *silent { "SILENT " } else { "" };
                let _ = write!(out, "{p}SERVICE {silent}{} ", self.var_or_term(endpoint));
                self.group(pattern, indent, out)?;
            }
            GroupElement::SubSelect(query) => {
                if let Some(named) = query.named_subqueries.first() {
                    return Err(SerializeError::NonCompliant(named.name.clone()));
                }
                let _ = writeln!(out, "{p}{{");
                self.query(query, indent + 1, out)?;
                let _ = write!(out, "{p}}}");
            }
            GroupElement::Filter(expression) => {
                let _ = write!(out, "{p}FILTER {}", self.expression(expression, indent)?);
            }
            GroupElement::Bind { expression, variable } => {
                let _ = write!(out, "{p}BIND({} AS ?{variable})", self.expression(expression, indent)?);
            }
            GroupElement::Values(values) => {
                let _ = write!(out, "{p}VALUES ");
                self.values(values, indent, out);
            }
            GroupElement::NamedInclude(name) => return Err(SerializeError::NonCompliant(name.clone())),
        }
        out.push('\n');
        Ok(())
    }

    fn values(&self, values: &InlineData, indent: usize, out: &mut String) {
        let vars: Vec<String> = values.variables.iter().map(|v| format!("?{v}")).collect();
        let _ = write!(out, "({}) {{", vars.join(" "));
        if values.rows.is_empty() {
            out.push_str(" }");
            return;
        }
        out.push('\n');
        for row in &values.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|cell| match cell {
                    Some(term) => self.term(term),
                    None => "UNDEF".to_string(),
                })
                .collect();
            let _ = writeln!(out, "{}({})", pad(indent + 1), cells.join(" "));
        }
        let _ = write!(out, "{}}}", pad(indent));
    }

    fn triple(&self, triple: &TriplePattern) -> String {
        let predicate = match &triple.predicate {
            Predicate::Variable(v) => format!("?{v}"),
            Predicate::Path(path) => self.path(path, 0),
        };
        format!(
            "{} {} {} .",
            self.var_or_term(&triple.subject),
            predicate,
            self.var_or_term(&triple.object)
        )
    }

    fn path(&self, path: &PropertyPath, min_level: u8) -> String {
        let text = match path {
            PropertyPath::Link(iri) => self.verb(iri),
            PropertyPath::Alternative(members) => {
                members.iter().map(|m| self.path(m, 1)).collect::<Vec<_>>().join(" | ")
            }
            PropertyPath::Sequence(members) => {
                members.iter().map(|m| self.path(m, 2)).collect::<Vec<_>>().join("/")
            }
            PropertyPath::Inverse(inner) => format!("^{}", self.path(inner, 3)),
            PropertyPath::ZeroOrMore(inner) => format!("{}*", self.path(inner, 4)),
            PropertyPath::OneOrMore(inner) => format!("{}+", self.path(inner, 4)),
            PropertyPath::ZeroOrOne(inner) => format!("{}?", self.path(inner, 4)),
            PropertyPath::NegatedSet(links) => {
                let rendered: Vec<String> = links
                    .iter()
                    .map(|l| format!("{}{}", if l.inverse { "^" } else { "" }, self.verb(&l.iri)))
                    .collect();
                if links.len() == 1 {
                    format!("!{}", rendered[0])
                } else {
                    format!("!({})", rendered.join(" | "))
                }
            }
        };
        if path_level(path) < min_level {
            format!("({text})")
        } else {
            text
        }
    }

    fn verb(&self, iri: &str) -> String {
        if iri == vocab::RDF_TYPE {
            "a".to_string()
        } else {
            self.iri(iri)
        }
    }

    fn var_or_term(&self, value: &VarOrTerm) -> String {
        match value {
            VarOrTerm::Variable(v) => format!("?{v}"),
            VarOrTerm::Term(term) => self.term(term),
        }
    }

    fn term(&self, term: &Term) -> String {
        match term {
            Term::Iri(iri) => self.iri(iri),
            Term::BlankNode(label) => format!("_:{label}"),
            Term::Literal(lit) => self.literal(lit),
        }
    }

    fn literal(&self, lit: &Literal) -> String {
        if lit.language.is_none() && is_bare_literal(&lit.lexical, &lit.datatype) {
            return lit.lexical.clone();
        }
        let mut out = quote_string(&lit.lexical);
        if let Some(tag) = &lit.language {
            out.push('@');
            out.push_str(tag);
        } else if lit.datatype != vocab::XSD_STRING {
            out.push_str("^^");
            out.push_str(&self.iri(&lit.datatype));
        }
        out
    }

    fn iri(&self, iri: &str) -> String {
        match self.prefixes.compact(iri) {
            Some((label, local)) => format!("{label}:{local}"),
            None => format!("<{}>", escape_iri(iri)),
        }
    }

    fn expression(&self, expression: &Expression, indent: usize) -> Result<String, SerializeError> {
        let mut out = String::new();
        let mut previous: Option<&str> = None;
        for part in &expression.parts {
            match part {
                ExprPart::Token(token) => {
                    if let Some(prev) = previous {
                        if needs_space(prev, token) {
                            out.push(' ');
                        }
                    }
                    out.push_str(token);
                    previous = Some(token);
                }
                ExprPart::Exists { negated, pattern } => {
                    if previous.is_some_and(|p| p != "(") {
                        out.push(' ');
                    }
                    if *negated {
                        out.push_str("NOT ");
                    }
                    out.push_str("EXISTS ");
                    self.group(pattern, indent, &mut out)?;
                    previous = Some("}");
                }
            }
        }
        Ok(out)
    }
}

fn path_level(path: &PropertyPath) -> u8 {
    match path {
        PropertyPath::Alternative(_) => 0,
        PropertyPath::Sequence(_) => 1,
        PropertyPath::Inverse(_) => 2,
        PropertyPath::ZeroOrMore(_) | PropertyPath::OneOrMore(_) | PropertyPath::ZeroOrOne(_) => 3,
        PropertyPath::Link(_) | PropertyPath::NegatedSet(_) => 4,
    }
}

fn is_word(token: &str) -> bool {
    token
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '<' && token.len() > 1 && token.ends_with('>'))
        || token.contains(':') && !token.starts_with('"')
}

fn needs_space(previous: &str, token: &str) -> bool {
    if previous == "(" || previous == "!" || token == ")" || token == "," {
        return false;
    }
    if token == "(" {
        return !is_word(previous);
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparql::parse_query;

    fn round_trip(text: &str) {
        let first = parse_query(text, None, Dialect::Strict).unwrap();
        let written = serialize_query(&first).unwrap();
        let second = parse_query(&written, None, Dialect::Strict)
            .unwrap_or_else(|e| panic!("re-parse failed: {e}\n{written}"));
        assert_eq!(first, second, "{written}");
    }

    #[test]
    fn ask_with_empty_group() {
        let query = parse_query("ASK WHERE {}", None, Dialect::Strict).unwrap();
        let text = serialize_query(&query).unwrap();
        assert_eq!(text.split_whitespace().collect::<Vec<_>>(), ["ASK", "WHERE", "{", "}"]);
    }

    #[test]
    fn paths_keep_precedence() {
        round_trip("PREFIX e: <http://e/> SELECT * WHERE { ?a (e:p|e:q)/^e:r* ?b . ?a ^(e:p/e:q)+ ?c . ?a !(e:x|^a) ?d . ?a (e:p*)? ?e }");
    }

    #[test]
    fn expressions_and_nesting() {
        round_trip(
            r#"PREFIX e: <http://e/>
            SELECT DISTINCT ?s (COUNT(DISTINCT ?o) AS ?n) WHERE {
              ?s e:p ?o ; e:q "x"@en , "5"^^e:t , -3 , 2.5 , true .
              OPTIONAL { ?o e:r [ e:s ?z ] }
              { ?s a e:A } UNION { ?s a e:B } UNION { SELECT ?s WHERE { ?s e:c ?d } LIMIT 3 }
              FILTER(?o != <http://e/x> && !BOUND(?z) || REGEX(STR(?s), "^a", "i"))
              FILTER NOT EXISTS { ?s e:gone ?g }
              BIND(CONCAT(STR(?s), "-") AS ?label)
              VALUES (?s ?o) { (e:a UNDEF) (<http://e/b> "y") }
              MINUS { ?s e:m ?m }
              GRAPH ?g { ?s e:h ?h }
              SERVICE SILENT <https://sparql.rhea-db.org/sparql> { ?s e:k ?k }
            }
            GROUP BY ?s HAVING (COUNT(?o) > 1) ORDER BY DESC(?n) ?s LIMIT 10 OFFSET 2
            VALUES ?s { e:a }"#,
        );
    }

    #[test]
    fn construct_and_describe() {
        round_trip("PREFIX e: <http://e/> CONSTRUCT { ?s e:p ?o } WHERE { ?s e:q ?o }");
        round_trip("PREFIX e: <http://e/> CONSTRUCT WHERE { ?s e:q ?o }");
        round_trip("DESCRIBE <http://e/x>");
        round_trip("PREFIX e: <http://e/> DESCRIBE ?x FROM NAMED e:g WHERE { ?x a e:T }");
    }

    #[test]
    fn named_include_is_rejected() {
        let query = parse_query(
            "SELECT ?x WITH { SELECT ?x WHERE { ?x a ?c } } AS %s WHERE { INCLUDE %s }",
            None,
            Dialect::Extended,
        )
        .unwrap();
        assert!(matches!(serialize_query(&query), Err(SerializeError::NonCompliant(_))));
    }

    #[test]
    fn injected_prefixes_are_written() {
        let extra: PrefixMap = [("up", "http://purl.uniprot.org/core/")].into_iter().collect();
        let query = parse_query("SELECT ?p WHERE { ?p a up:Protein }", Some(&extra), Dialect::Strict).unwrap();
        let text = serialize_query(&query).unwrap();
        assert!(text.starts_with("PREFIX up: <http://purl.uniprot.org/core/>\n"));
        let back = parse_query(&text, None, Dialect::Strict).unwrap();
        assert_eq!(back, query);
    }
}
