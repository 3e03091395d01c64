//! Example files, corpora, search and statistics.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::rdf::{is_absolute_iri, parse_turtle, vocab, PrefixMap, Term, Triple, TurtleError};
use crate::sparql::{count_triple_patterns, is_federated, parse_query, Dialect, ParseError, Query, QueryKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Question {
    pub text: String,
    pub lang: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryExample {
    /// Subject IRI, or `_:label` when the executable is a blank node.
    pub id: String,
    pub query_type: QueryKind,
    pub questions: Vec<Question>,
    pub query_text: String,
    pub targets: Vec<String>,
    pub keywords: Vec<String>,
    /// Bindings from the example's own `sh:prefixes` resource.
    pub prefix_decls: PrefixMap,
    pub declared_federated: bool,
    pub declared_types: Vec<String>,
    pub source_path: PathBuf,
    pub project: String,
}

impl QueryExample {
    /// English question when there is one, else the first.
    pub fn preferred_question(&self) -> Option<&Question> {
        self.questions
            .iter()
            .find(|q| q.lang.as_deref().is_some_and(is_english))
            .or_else(|| self.questions.first())
    }

    /// Preferred question first, the rest in file order.
    pub fn ordered_questions(&self) -> Vec<&Question> {
        let mut out: Vec<&Question> = Vec::with_capacity(self.questions.len());
        if let Some(first) = self.preferred_question() {
            out.push(first);
        }
        for q in &self.questions {
            if !std::ptr::eq(q, out[0]) {
                out.push(q);
            }
        }
        out
    }

    pub fn is_blank(&self) -> bool {
        self.id.starts_with("_:")
    }
}

fn is_english(tag: &str) -> bool {
    tag.eq_ignore_ascii_case("en") || tag.to_ascii_lowercase().starts_with("en-")
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read file: {0}")]
    Io(String),
    #[error(transparent)]
    Turtle(#[from] TurtleError),
    #[error("no subject typed sh:SPARQLExecutable")]
    NoExecutable,
    #[error("more than one executable in one file: {0:?}")]
    MultipleExecutables(Vec<String>),
    #[error("no query text (sh:select, sh:ask, sh:construct or spex:describe)")]
    MissingQuery,
    #[error("several query texts: {0:?}")]
    MultipleQueries(Vec<String>),
    #[error("query text is not a literal")]
    QueryNotLiteral,
    #[error("declared type {declared} does not match query property {property}")]
    QueryTypeMismatch { declared: String, property: String },
    #[error("malformed target: {0}")]
    MalformedTarget(String),
}

impl LoadError {
    pub fn line(&self) -> Option<usize> {
        match self {
            LoadError::Turtle(e) => Some(e.line()),
            _ => None,
        }
    }
}

const QUERY_PROPERTIES: [(&str, QueryKind); 4] = [
    (vocab::SH_SELECT, QueryKind::Select),
    (vocab::SH_ASK, QueryKind::Ask),
    (vocab::SH_CONSTRUCT, QueryKind::Construct),
    (vocab::SPEX_DESCRIBE, QueryKind::Describe),
];

const EXECUTABLE_TYPES: [(&str, Option<QueryKind>); 5] = [
    (vocab::SH_SPARQL_EXECUTABLE, None),
    (vocab::SH_SELECT_EXECUTABLE, Some(QueryKind::Select)),
    (vocab::SH_ASK_EXECUTABLE, Some(QueryKind::Ask)),
    (vocab::SH_CONSTRUCT_EXECUTABLE, Some(QueryKind::Construct)),
    (vocab::SPEX_DESCRIBE_EXECUTABLE, Some(QueryKind::Describe)),
];

pub fn load_example_file(path: &Path, project_prefixes: &PrefixMap) -> Result<QueryExample, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io(e.to_string()))?;
    let project = path
        .parent()
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    load_example_text(&text, path, &project, project_prefixes)
}

/// Same as [`load_example_file`] for text already in memory.
pub fn load_example_text(
    text: &str,
    source_path: &Path,
    project: &str,
    project_prefixes: &PrefixMap,
) -> Result<QueryExample, LoadError> {
    let triples = parse_with_fallback(text, project_prefixes)?;
    example_from_triples(&triples, source_path, project)
}

/// Parses Turtle; when a prefix is undeclared but known to the project,
/// retries with the project bindings put in front on line 1 so reported
/// line numbers stay valid.
fn parse_with_fallback(text: &str, project_prefixes: &PrefixMap) -> Result<Vec<Triple>, TurtleError> {
    match parse_turtle(text, None) {
        Ok((triples, _)) => Ok(triples),
        Err(TurtleError::UndeclaredPrefix { prefix, .. }) if project_prefixes.contains(&prefix) => {
            let mut header = String::new();
            for (label, ns) in project_prefixes.iter() {
                header.push_str(&format!("@prefix {label}: <{ns}> . "));
            }
            header.push_str(text);
            parse_turtle(&header, None).map(|(t, _)| t)
        }
        Err(e) => Err(e),
    }
}

fn objects<'a>(triples: &'a [Triple], subject: &'a Term, predicate: &'a str) -> impl Iterator<Item = &'a Term> {
    triples
        .iter()
        .filter(move |t| &t.subject == subject && t.predicate_iri() == predicate)
        .map(|t| &t.object)
}

fn term_id(term: &Term) -> String {
    match term {
        Term::Iri(iri) => iri.clone(),
        Term::BlankNode(label) => format!("_:{label}"),
        Term::Literal(lit) => lit.lexical.clone(),
    }
}

pub(crate) fn local_name(iri: &str) -> &str {
    iri.rsplit(['#', '/']).next().unwrap_or(iri)
}

fn executable_subjects(triples: &[Triple]) -> Vec<&Term> {
    let mut subjects: Vec<&Term> = Vec::new();
    for t in triples {
        if t.predicate_iri() == vocab::RDF_TYPE
            && t.object.as_iri().is_some_and(|o| EXECUTABLE_TYPES.iter().any(|(iri, _)| *iri == o))
            && !subjects.contains(&&t.subject)
        {
            subjects.push(&t.subject);
        }
    }
    subjects
}

fn example_from_triples(triples: &[Triple], source_path: &Path, project: &str) -> Result<QueryExample, LoadError> {
    let subjects = executable_subjects(triples);
    let subject = match subjects.as_slice() {
        [] => return Err(LoadError::NoExecutable),
        [one] => *one,
        many => return Err(LoadError::MultipleExecutables(many.iter().map(|s| term_id(s)).collect())),
    };
    example_for_subject(triples, subject, source_path, project)
}

/// Every executable in a Turtle or TriG document, such as a compiled
/// bundle. Graph names are ignored.
pub fn load_bundle(text: &str, source_path: &Path, project: &str) -> Result<Vec<QueryExample>, LoadError> {
    let (quads, _) = crate::rdf::parse_trig(text, None)?;
    let triples: Vec<Triple> = quads.into_iter().map(|q| q.triple).collect();
    executable_subjects(&triples)
        .into_iter()
        .map(|subject| example_for_subject(&triples, subject, source_path, project))
        .collect()
}

fn example_for_subject(
    triples: &[Triple],
    subject: &Term,
    source_path: &Path,
    project: &str,
) -> Result<QueryExample, LoadError> {
    let declared_types: Vec<String> = objects(triples, subject, vocab::RDF_TYPE)
        .filter_map(|o| o.as_iri().map(str::to_string))
        .collect();

    let mut found: Vec<(&str, QueryKind, &Term)> = Vec::new();
    for (property, kind) in QUERY_PROPERTIES {
        for object in objects(triples, subject, property) {
            found.push((property, kind, object));
        }
    }
    let (property, query_type, query_term) = match found.as_slice() {
        [] => return Err(LoadError::MissingQuery),
        [one] => *one,
        many => return Err(LoadError::MultipleQueries(many.iter().map(|(p, ..)| p.to_string()).collect())),
    };
    let query_text = query_term.as_literal().ok_or(LoadError::QueryNotLiteral)?.lexical.clone();
    for declared in &declared_types {
        if let Some((_, Some(kind))) = EXECUTABLE_TYPES.iter().find(|(iri, _)| iri == declared) {
            if *kind != query_type {
                return Err(LoadError::QueryTypeMismatch {
                    declared: declared.clone(),
                    property: property.to_string(),
                });
            }
        }
    }

    let questions = objects(triples, subject, vocab::RDFS_COMMENT)
        .filter_map(Term::as_literal)
        .map(|lit| Question {
            text: lit.lexical.clone(),
            lang: lit.language.clone(),
        })
        .collect();

    let mut targets = Vec::new();
    for object in objects(triples, subject, vocab::SCHEMA_TARGET) {
        match object {
            Term::Iri(iri) if is_absolute_iri(iri) && url::Url::parse(iri).is_ok() => targets.push(iri.clone()),
            other => return Err(LoadError::MalformedTarget(term_id(other))),
        }
    }

    let keywords: Vec<String> = objects(triples, subject, vocab::SCHEMA_KEYWORDS)
        .filter_map(Term::as_literal)
        .map(|lit| lit.lexical.clone())
        .collect();

    let mut prefix_decls = PrefixMap::new();
    for resource in objects(triples, subject, vocab::SH_PREFIXES) {
        collect_declarations(triples, Some(resource), &mut prefix_decls);
    }

    let declared_federated = keywords.iter().any(|k| k.eq_ignore_ascii_case("federated"))
        || declared_types.iter().any(|t| local_name(t) == "FederatedQuery");

    Ok(QueryExample {
        id: term_id(subject),
        query_type,
        questions,
        query_text,
        targets,
        keywords,
        prefix_decls,
        declared_federated,
        declared_types,
        source_path: source_path.to_path_buf(),
        project: project.to_string(),
    })
}

/// `sh:declare` entries of `resource`, or of every subject when `None`.
fn collect_declarations(triples: &[Triple], resource: Option<&Term>, out: &mut PrefixMap) {
    for t in triples {
        if t.predicate_iri() != vocab::SH_DECLARE || resource.is_some_and(|r| r != &t.subject) {
            continue;
        }
        let label = objects(triples, &t.object, vocab::SH_PREFIX)
            .find_map(Term::as_literal)
            .map(|l| l.lexical.clone());
        let namespace = objects(triples, &t.object, vocab::SH_NAMESPACE).find_map(|o| match o {
            Term::Iri(iri) => Some(iri.clone()),
            Term::Literal(lit) => Some(lit.lexical.clone()),
            Term::BlankNode(_) => None,
        });
        if let (Some(label), Some(namespace)) = (label, namespace) {
            if !out.contains(&label) {
                out.insert(label, namespace);
            }
        }
    }
}

/// Every `sh:declare` entry in a prefix file.
pub fn load_prefix_file(path: &Path) -> Result<PrefixMap, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io(e.to_string()))?;
    let (triples, _) = parse_turtle(&text, None)?;
    let mut out = PrefixMap::new();
    collect_declarations(&triples, None, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadIssue {
    pub path: PathBuf,
    #[serde(serialize_with = "display")]
    pub error: LoadError,
}

fn display<S: serde::Serializer, T: fmt::Display>(value: &T, serializer: S) -> Result<S::Ok, S::Error> {
    serializer.collect_str(value)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DuplicateId {
    pub id: String,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Corpus {
    pub examples: Vec<QueryExample>,
    pub projects: Vec<String>,
    /// Union of the per-project prefix files, first binding wins.
    pub prefix_registry: PrefixMap,
    pub project_prefixes: BTreeMap<String, PrefixMap>,
    pub load_errors: Vec<LoadIssue>,
    /// Ids held by more than one file. Every copy stays in `examples`.
    pub duplicates: Vec<DuplicateId>,
}

pub const PREFIX_FILE: &str = "prefixes.ttl";

impl Corpus {
    /// Builds a corpus from already-loaded examples.
    pub fn from_examples(mut examples: Vec<QueryExample>, prefix_registry: PrefixMap) -> Self {
        examples.sort_by(|a, b| a.source_path.cmp(&b.source_path));
        let mut projects: Vec<String> = examples.iter().map(|e| e.project.clone()).collect();
        projects.sort();
        projects.dedup();
        let duplicates = find_duplicates(&examples);
        Corpus {
            examples,
            projects,
            prefix_registry,
            project_prefixes: BTreeMap::new(),
            load_errors: Vec::new(),
            duplicates,
        }
    }

    pub fn get(&self, id: &str) -> Option<&QueryExample> {
        self.examples.iter().find(|e| e.id == id)
    }

    /// Bindings a query of `example` may rely on without declaring them:
    /// its own `sh:prefixes`, then its project's file, then the registry.
    pub fn fallback_prefixes(&self, example: &QueryExample) -> PrefixMap {
        let mut out = example.prefix_decls.clone();
        if let Some(project) = self.project_prefixes.get(&example.project) {
            out.merge_missing(project);
        }
        out.merge_missing(&self.prefix_registry);
        out
    }

    /// Parses an example's query in the extended dialect with its fallback
    /// prefixes.
    pub fn parse(&self, example: &QueryExample) -> Result<Query, ParseError> {
        parse_query(&example.query_text, Some(&self.fallback_prefixes(example)), Dialect::Extended)
    }

    pub fn for_target<'a>(&'a self, endpoint: &'a str) -> impl Iterator<Item = &'a QueryExample> {
        self.examples
            .iter()
            .filter(move |e| e.targets.iter().any(|t| same_endpoint(t, endpoint)))
    }
}

/// Endpoint IRIs compare equal regardless of one trailing slash.
pub fn same_endpoint(a: &str, b: &str) -> bool {
    a.trim_end_matches('/') == b.trim_end_matches('/')
}

fn find_duplicates(examples: &[QueryExample]) -> Vec<DuplicateId> {
    let mut by_id: BTreeMap<&str, Vec<PathBuf>> = BTreeMap::new();
    for e in examples {
        by_id.entry(&e.id).or_default().push(e.source_path.clone());
    }
    by_id
        .into_iter()
        .filter(|(_, files)| files.len() > 1)
        .map(|(id, files)| DuplicateId { id: id.to_string(), files })
        .collect()
}

/// Loads `<root>/examples/<Project>/*.ttl`, or `<root>/<Project>/*.ttl`
/// when there is no `examples` folder. Per-file problems end up in
/// [`Corpus::load_errors`].
pub fn load_corpus(root: &Path) -> Result<Corpus, LoadError> {
    if !root.is_dir() {
        return Err(LoadError::Io(format!("{} is not a directory", root.display())));
    }
    let base = if root.join("examples").is_dir() {
        root.join("examples")
    } else {
        root.to_path_buf()
    };

    let mut example_files: Vec<(String, PathBuf)> = Vec::new();
    let mut prefix_files: Vec<(String, PathBuf)> = Vec::new();
    for entry in walkdir::WalkDir::new(&base).min_depth(2).sort_by_file_name() {
        let entry = entry.map_err(|e| LoadError::Io(e.to_string()))?;
        let path = entry.path();
        if !entry.file_type().is_file() || path.extension().is_none_or(|x| x != "ttl") {
            continue;
        }
        let project = path
            .strip_prefix(&base)
            .ok()
            .and_then(|rel| rel.components().next())
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .unwrap_or_default();
        if path.file_name().is_some_and(|n| n == PREFIX_FILE) {
            prefix_files.push((project, path.to_path_buf()));
        } else {
            example_files.push((project, path.to_path_buf()));
        }
    }

    let mut load_errors = Vec::new();
    let mut project_prefixes: BTreeMap<String, PrefixMap> = BTreeMap::new();
    let mut registry = PrefixMap::new();
    for (project, path) in &prefix_files {
        match load_prefix_file(path) {
            Ok(map) => {
                registry.merge_missing(&map);
                project_prefixes.entry(project.clone()).or_default().merge_missing(&map);
            }
            Err(error) => load_errors.push(LoadIssue { path: path.clone(), error }),
        }
    }

    let empty = PrefixMap::new();
    let results: Vec<(PathBuf, Result<QueryExample, LoadError>)> = example_files
        .par_iter()
        .map(|(project, path)| {
            let prefixes = project_prefixes.get(project).unwrap_or(&empty);
            let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io(e.to_string()));
            let loaded = text.and_then(|t| load_example_text(&t, path, project, prefixes));
            (path.clone(), loaded)
        })
        .collect();

    let mut examples = Vec::new();
    for (path, result) in results {
        match result {
            Ok(example) => examples.push(example),
            Err(error) => load_errors.push(LoadIssue { path, error }),
        }
    }
    load_errors.sort_by(|a, b| a.path.cmp(&b.path));
    let mut corpus = Corpus::from_examples(examples, registry);
    corpus.project_prefixes = project_prefixes;
    corpus.load_errors = load_errors;
    let mut projects: Vec<String> = corpus.projects.clone();
    projects.extend(corpus.project_prefixes.keys().cloned());
    projects.sort();
    projects.dedup();
    corpus.projects = projects;
    Ok(corpus)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchField {
    Question,
    Query,
    Keywords,
}

impl SearchField {
    pub const ALL: [SearchField; 3] = [SearchField::Question, SearchField::Query, SearchField::Keywords];
}

impl FromStr for SearchField {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "question" | "questions" => Ok(SearchField::Question),
            "query" => Ok(SearchField::Query),
            "keywords" | "keyword" => Ok(SearchField::Keywords),
            other => Err(format!("unknown search field '{other}' (expected question, query or keywords)")),
        }
    }
}

/// Case-sensitive substring search, like SPARQL `contains()`. Results are
/// ordered by id.
pub fn search<'a>(corpus: &'a Corpus, needle: &str, fields: &[SearchField]) -> Vec<&'a QueryExample> {
    if needle.is_empty() {
        return Vec::new();
    }
    let mut hits: Vec<&QueryExample> = corpus
        .examples
        .iter()
        .filter(|e| {
            fields.iter().any(|field| match field {
                SearchField::Question => e.questions.iter().any(|q| q.text.contains(needle)),
                SearchField::Query => e.query_text.contains(needle),
                SearchField::Keywords => e.keywords.iter().any(|k| k.contains(needle)),
            })
        })
        .collect();
    hits.sort_by(|a, b| a.id.cmp(&b.id).then_with(|| a.source_path.cmp(&b.source_path)));
    hits
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ProjectStats {
    pub example_count: usize,
    pub federated_count: usize,
    /// Mean over the parsable queries; 0 when there are none.
    pub mean_triple_patterns: f64,
    pub unparsable: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CorpusStats {
    pub projects: BTreeMap<String, ProjectStats>,
    pub total: ProjectStats,
    /// `(id, parse error)` of each excluded query.
    pub excluded: Vec<(String, String)>,
}

#[derive(Default)]
struct Accumulator {
    examples: usize,
    federated: usize,
    patterns: usize,
    parsed: usize,
    unparsable: usize,
}

impl Accumulator {
    fn finish(&self) -> ProjectStats {
        ProjectStats {
            example_count: self.examples,
            federated_count: self.federated,
            mean_triple_patterns: if self.parsed == 0 {
                0.0
            } else {
                self.patterns as f64 / self.parsed as f64
            },
            unparsable: self.unparsable,
        }
    }
}

pub fn stats(corpus: &Corpus) -> CorpusStats {
    let parsed: Vec<Result<Query, ParseError>> = corpus.examples.par_iter().map(|e| corpus.parse(e)).collect();
    let mut per_project: HashMap<&str, Accumulator> = HashMap::new();
    let mut total = Accumulator::default();
    let mut excluded = Vec::new();
    for (example, result) in corpus.examples.iter().zip(parsed) {
        let acc = per_project.entry(&example.project).or_default();
        acc.examples += 1;
        total.examples += 1;
        match result {
            Ok(query) => {
                let count = count_triple_patterns(&query);
                let federated = usize::from(is_federated(&query));
                for a in [&mut *acc, &mut total] {
                    a.parsed += 1;
                    a.patterns += count;
                    a.federated += federated;
                }
            }
            Err(error) => {
                acc.unparsable += 1;
                total.unparsable += 1;
                excluded.push((example.id.clone(), error.to_string()));
            }
        }
    }
    CorpusStats {
        projects: per_project.into_iter().map(|(k, v)| (k.to_string(), v.finish())).collect(),
        total: total.finish(),
        excluded,
    }
}
