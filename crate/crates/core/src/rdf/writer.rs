use std::collections::HashMap;
use std::fmt::Write;

use indexmap::IndexMap;

use super::{vocab, Literal, PrefixMap, Term, Triple};

/// Writes triples as Turtle, or as a single TriG graph block when `graph`
/// is given. Subjects and predicates keep their first-encounter order and
/// blank nodes are relabelled `b0`, `b1`, ... so equal input gives
/// byte-identical output.
pub fn serialize_turtle(triples: &[Triple], prefixes: &PrefixMap, graph: Option<&str>) -> String {
    let mut out = String::new();
    for (label, ns) in prefixes.iter() {
        let _ = writeln!(out, "@prefix {label}: <{}> .", escape_iri(ns));
    }

    let mut blanks: HashMap<&str, usize> = HashMap::new();
    let mut subjects: IndexMap<&Term, IndexMap<&str, Vec<&Term>>> = IndexMap::new();
    for triple in triples {
        for term in [&triple.subject, &triple.object] {
            if let Term::BlankNode(label) = term {
                let next = blanks.len();
                blanks.entry(label.as_str()).or_insert(next);
            }
        }
        let objects = subjects
            .entry(&triple.subject)
            .or_default()
            .entry(triple.predicate_iri())
            .or_default();
        if !objects.contains(&&triple.object) {
            objects.push(&triple.object);
        }
    }
    if subjects.is_empty() {
        return out;
    }
    if !prefixes.is_empty() {
        out.push('\n');
    }

    let writer = TermWriter { prefixes, blanks };
    let indent = if graph.is_some() { "    " } else { "" };
    if let Some(graph) = graph {
        let _ = writeln!(out, "{} {{", writer.iri(graph));
    }
    for (index, (subject, predicates)) in subjects.iter().enumerate() {
        if index > 0 {
            out.push('\n');
        }
        let _ = write!(out, "{indent}{}", writer.term(subject));
        for (p_index, (predicate, objects)) in predicates.iter().enumerate() {
            if p_index > 0 {
                let _ = write!(out, " ;\n{indent}   ");
            }
            let verb = if *predicate == vocab::RDF_TYPE {
                "a".to_string()
            } else {
                writer.iri(predicate)
            };
            let rendered: Vec<String> = objects.iter().map(|o| writer.term(o)).collect();
            let _ = write!(out, " {verb} {}", rendered.join(" , "));
        }
        out.push_str(" .\n");
    }
    if graph.is_some() {
        out.push_str("}\n");
    }
    out
}

struct TermWriter<'a> {
    prefixes: &'a PrefixMap,
    blanks: HashMap<&'a str, usize>,
}

impl TermWriter<'_> {
    fn term(&self, term: &Term) -> String {
        match term {
            Term::Iri(iri) => self.iri(iri),
            Term::BlankNode(label) => format!("_:b{}", self.blanks[label.as_str()]),
            Term::Literal(lit) => self.literal(lit),
        }
    }

    fn iri(&self, iri: &str) -> String {
        match self.prefixes.compact(iri) {
            Some((label, local)) => format!("{label}:{local}"),
            None => format!("<{}>", escape_iri(iri)),
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
}

/// Numeric and boolean literals that read back with the same lexical
/// form and datatype when written without quotes.
pub(crate) fn is_bare_literal(lexical: &str, datatype: &str) -> bool {
    let unsigned = lexical.strip_prefix(['+', '-']).unwrap_or(lexical);
    let all_digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    match datatype {
        vocab::XSD_BOOLEAN => lexical == "true" || lexical == "false",
        vocab::XSD_INTEGER => all_digits(unsigned),
        vocab::XSD_DECIMAL => match unsigned.split_once('.') {
            Some((int, frac)) => (int.is_empty() || all_digits(int)) && all_digits(frac),
            None => false,
        },
        vocab::XSD_DOUBLE => {
            let Some((mantissa, exponent)) = unsigned.split_once(['e', 'E']) else {
                return false;
            };
            let exponent = exponent.strip_prefix(['+', '-']).unwrap_or(exponent);
            let mantissa_ok = match mantissa.split_once('.') {
                Some((int, frac)) => {
                    (int.is_empty() || all_digits(int))
                        && (frac.is_empty() || all_digits(frac))
                        && !(int.is_empty() && frac.is_empty())
                }
                None => all_digits(mantissa),
            };
            mantissa_ok && all_digits(exponent)
        }
        _ => false,
    }
}

/// Quotes a string for Turtle or SPARQL; multi-line values use the long
/// form so embedded queries stay readable.
pub(crate) fn quote_string(value: &str) -> String {
    let long = value.contains('\n');
    let mut out = String::with_capacity(value.len() + 6);
    out.push_str(if long { "\"\"\"" } else { "\"" });
    for c in value.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' if !long => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' if !long => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push_str(if long { "\"\"\"" } else { "\"" });
    out
}

pub(crate) fn escape_iri(iri: &str) -> String {
    let mut out = String::with_capacity(iri.len());
    for c in iri.chars() {
        if c <= ' ' || matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\') {
            let _ = write!(out, "\\u{:04X}", c as u32);
        } else {
            out.push(c);
        }
    }
    out
}
