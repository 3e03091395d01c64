//! RDF terms, triples and prefix maps, plus the Turtle subset used by
//! example files and published bundles.

mod turtle;
pub(crate) mod writer;

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub use turtle::{parse_trig, parse_turtle, Quad, TurtleError};
pub use writer::serialize_turtle;

pub mod vocab {
    pub const RDF: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
    pub const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";
    pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";
    pub const SH: &str = "http://www.w3.org/ns/shacl#";
    pub const SCHEMA: &str = "https://schema.org/";
    pub const OWL: &str = "http://www.w3.org/2002/07/owl#";
    pub const SPEX: &str = "https://purl.expasy.org/sparql-examples/ontology#";
    pub const VOID: &str = "http://rdfs.org/ns/void#";

    pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
    pub const RDF_LANG_STRING: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#langString";
    pub const RDFS_COMMENT: &str = "http://www.w3.org/2000/01/rdf-schema#comment";

    pub const XSD_STRING: &str = "http://www.w3.org/2001/XMLSchema#string";
    pub const XSD_INTEGER: &str = "http://www.w3.org/2001/XMLSchema#integer";
    pub const XSD_DECIMAL: &str = "http://www.w3.org/2001/XMLSchema#decimal";
    pub const XSD_DOUBLE: &str = "http://www.w3.org/2001/XMLSchema#double";
    pub const XSD_BOOLEAN: &str = "http://www.w3.org/2001/XMLSchema#boolean";
    pub const XSD_ANY_URI: &str = "http://www.w3.org/2001/XMLSchema#anyURI";

    pub const SH_SPARQL_EXECUTABLE: &str = "http://www.w3.org/ns/shacl#SPARQLExecutable";
    pub const SH_SELECT_EXECUTABLE: &str = "http://www.w3.org/ns/shacl#SPARQLSelectExecutable";
    pub const SH_ASK_EXECUTABLE: &str = "http://www.w3.org/ns/shacl#SPARQLAskExecutable";
    pub const SH_CONSTRUCT_EXECUTABLE: &str =
        "http://www.w3.org/ns/shacl#SPARQLConstructExecutable";
    pub const SH_SELECT: &str = "http://www.w3.org/ns/shacl#select";
    pub const SH_ASK: &str = "http://www.w3.org/ns/shacl#ask";
    pub const SH_CONSTRUCT: &str = "http://www.w3.org/ns/shacl#construct";
    pub const SH_PREFIXES: &str = "http://www.w3.org/ns/shacl#prefixes";
    pub const SH_DECLARE: &str = "http://www.w3.org/ns/shacl#declare";
    pub const SH_PREFIX: &str = "http://www.w3.org/ns/shacl#prefix";
    pub const SH_NAMESPACE: &str = "http://www.w3.org/ns/shacl#namespace";

    pub const SCHEMA_TARGET: &str = "https://schema.org/target";
    pub const SCHEMA_KEYWORDS: &str = "https://schema.org/keywords";

    pub const SPEX_DESCRIBE: &str = "https://purl.expasy.org/sparql-examples/ontology#describe";
    pub const SPEX_DESCRIBE_EXECUTABLE: &str =
        "https://purl.expasy.org/sparql-examples/ontology#SPARQLDescribeExecutable";

    pub const OWL_ONTOLOGY: &str = "http://www.w3.org/2002/07/owl#Ontology";
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub lexical: String,
    pub datatype: String,
    pub language: Option<String>,
}

impl Literal {
    pub fn simple(lexical: impl Into<String>) -> Self {
        Self {
            lexical: lexical.into(),
            datatype: vocab::XSD_STRING.to_string(),
            language: None,
        }
    }

    pub fn lang(lexical: impl Into<String>, tag: impl Into<String>) -> Self {
        Self {
            lexical: lexical.into(),
            datatype: vocab::RDF_LANG_STRING.to_string(),
            language: Some(tag.into()),
        }
    }

    pub fn typed(lexical: impl Into<String>, datatype: impl Into<String>) -> Self {
        Self {
            lexical: lexical.into(),
            datatype: datatype.into(),
            language: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Iri(String),
    BlankNode(String),
    Literal(Literal),
}

impl Term {
    pub fn iri(value: impl Into<String>) -> Self {
        Term::Iri(value.into())
    }

    pub fn as_iri(&self) -> Option<&str> {
        match self {
            Term::Iri(iri) => Some(iri),
            _ => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Term::Literal(lit) => Some(lit),
            _ => None,
        }
    }

    pub fn is_blank(&self) -> bool {
        matches!(self, Term::BlankNode(_))
    }
}

/// N-Triples style rendering, used in diagnostics.
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(iri) => write!(f, "<{iri}>"),
            Term::BlankNode(label) => write!(f, "_:{label}"),
            Term::Literal(lit) => {
                write!(f, "{:?}", lit.lexical)?;
                match &lit.language {
                    Some(tag) => write!(f, "@{tag}"),
                    None if lit.datatype == vocab::XSD_STRING => Ok(()),
                    None => write!(f, "^^<{}>", lit.datatype),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Term, predicate: impl Into<String>, object: Term) -> Self {
        debug_assert!(!matches!(subject, Term::Literal(_)));
        Self {
            subject,
            predicate: Term::Iri(predicate.into()),
            object,
        }
    }

    pub fn predicate_iri(&self) -> &str {
        self.predicate.as_iri().unwrap_or_default()
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("undeclared prefix '{0}'")]
pub struct UndeclaredPrefix(pub String);

/// Ordered prefix label to namespace mapping.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrefixMap {
    entries: IndexMap<String, String>,
}

impl PrefixMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Binds `label`, replacing (and returning) any previous namespace.
    pub fn insert(&mut self, label: impl Into<String>, namespace: impl Into<String>) -> Option<String> {
        self.entries.insert(label.into(), namespace.into())
    }

    pub fn get(&self, label: &str) -> Option<&str> {
        self.entries.get(label).map(String::as_str)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.entries.contains_key(label)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn expand(&self, label: &str, local: &str) -> Result<String, UndeclaredPrefix> {
        self.get(label)
            .map(|ns| format!("{ns}{local}"))
            .ok_or_else(|| UndeclaredPrefix(label.to_string()))
    }

    /// Adds every binding of `other` whose label is not bound here yet.
    pub fn merge_missing(&mut self, other: &PrefixMap) {
        for (label, ns) in other.iter() {
            if !self.contains(label) {
                self.insert(label, ns);
            }
        }
    }

    /// Longest-namespace match whose remainder is a safe local name.
    pub fn compact<'a>(&'a self, iri: &'a str) -> Option<(&'a str, &'a str)> {
        self.entries
            .iter()
            .filter(|(_, ns)| !ns.is_empty() && iri.starts_with(ns.as_str()))
            .map(|(label, ns)| (label.as_str(), &iri[ns.len()..]))
            .filter(|(_, local)| is_safe_local(local))
            .min_by_key(|(_, local)| local.len())
    }

    pub fn sorted(&self) -> PrefixMap {
        let mut entries = self.entries.clone();
        entries.sort_keys();
        PrefixMap { entries }
    }
}

impl FromIterator<(String, String)> for PrefixMap {
    fn from_iter<T: IntoIterator<Item = (String, String)>>(iter: T) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}

impl<'a> FromIterator<(&'a str, &'a str)> for PrefixMap {
    fn from_iter<T: IntoIterator<Item = (&'a str, &'a str)>>(iter: T) -> Self {
        iter.into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }
}

/// Conservative local-name check shared by the Turtle and SPARQL writers:
/// anything accepted here reads back unchanged in both grammars.
pub(crate) fn is_safe_local(local: &str) -> bool {
    let mut chars = local.chars();
    let Some(first) = chars.next() else {
        return true;
    };
    if !(first.is_ascii_alphanumeric() || first == '_') {
        return false;
    }
    if local.ends_with('.') {
        return false;
    }
    chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// True when `iri` carries a scheme, e.g. `https:` or `urn:`.
pub fn is_absolute_iri(iri: &str) -> bool {
    let Some((scheme, _)) = iri.split_once(':') else {
        return false;
    };
    let mut chars = scheme.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
        && !iri.chars().any(|c| c.is_whitespace() || matches!(c, '<' | '>' | '"'))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compact_prefers_longest_namespace() {
        let prefixes: PrefixMap = [
            ("up", "http://purl.uniprot.org/"),
            ("core", "http://purl.uniprot.org/core/"),
        ]
        .into_iter()
        .collect();
        assert_eq!(
            prefixes.compact("http://purl.uniprot.org/core/Taxon"),
            Some(("core", "Taxon"))
        );
        assert_eq!(prefixes.compact("http://purl.uniprot.org/core/a b"), None);
    }

    #[test]
    fn expand_undeclared_is_an_error() {
        let prefixes = PrefixMap::new();
        assert_eq!(
            prefixes.expand("up", "Taxon"),
            Err(UndeclaredPrefix("up".into()))
        );
    }

    #[test]
    fn absolute_iri_detection() {
        assert!(is_absolute_iri("https://sparql.uniprot.org/sparql/"));
        assert!(is_absolute_iri("urn:x-local:1"));
        assert!(!is_absolute_iri("relative/path"));
        assert!(!is_absolute_iri("1http://x"));
    }
}
