//! Endpoint bundles, the Markdown site and the JSON export.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::rdf::{serialize_turtle, vocab, Literal, PrefixMap, Term, Triple};
use crate::sparql::QueryKind;
use crate::store::{local_name, Corpus, QueryExample};
use crate::viz::{emit_markdown_page, sanitize};

pub const WELL_KNOWN_SUFFIX: &str = ".well-known/sparql-examples";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GraphIriRule {
    /// Drop a trailing `/sparql` or `/sparql/` path segment first.
    #[default]
    StripSparqlPath,
    /// Append to the endpoint path as it is.
    KeepPath,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PublishError {
    #[error("endpoint '{0}' is not an http(s) IRI")]
    BadEndpoint(String),
    #[error("{0}")]
    Io(String),
}

impl From<io::Error> for PublishError {
    fn from(e: io::Error) -> Self {
        PublishError::Io(e.to_string())
    }
}

/// Named graph holding an endpoint's examples, e.g.
/// `https://sparql.uniprot.org/sparql/` gives
/// `https://sparql.uniprot.org/.well-known/sparql-examples`.
pub fn graph_iri(endpoint: &str, rule: GraphIriRule) -> Result<String, PublishError> {
    let url = url::Url::parse(endpoint).map_err(|_| PublishError::BadEndpoint(endpoint.to_string()))?;
    if !matches!(url.scheme(), "http" | "https") || !url.has_host() {
        return Err(PublishError::BadEndpoint(endpoint.to_string()));
    }
    let mut path = url.path().trim_end_matches('/');
    if rule == GraphIriRule::StripSparqlPath {
        path = path.strip_suffix("/sparql").unwrap_or(path);
    }
    let origin = url.origin().ascii_serialization();
    Ok(format!("{origin}{path}/{WELL_KNOWN_SUFFIX}"))
}

#[derive(Debug, Clone, Default)]
pub struct CompileOptions {
    pub graph_rule: GraphIriRule,
    /// Wrap the triples in a TriG block for the named graph.
    pub trig: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bundle {
    pub graph_iri: String,
    pub text: String,
    pub example_count: usize,
    /// `(original id, published id)` in output order.
    pub ids: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

fn query_property(kind: QueryKind) -> &'static str {
    match kind {
        QueryKind::Select => vocab::SH_SELECT,
        QueryKind::Ask => vocab::SH_ASK,
        QueryKind::Construct => vocab::SH_CONSTRUCT,
        QueryKind::Describe => vocab::SPEX_DESCRIBE,
    }
}

fn executable_type(kind: QueryKind) -> &'static str {
    match kind {
        QueryKind::Select => vocab::SH_SELECT_EXECUTABLE,
        QueryKind::Ask => vocab::SH_ASK_EXECUTABLE,
        QueryKind::Construct => vocab::SH_CONSTRUCT_EXECUTABLE,
        QueryKind::Describe => vocab::SPEX_DESCRIBE_EXECUTABLE,
    }
}

/// Merges every example targeting `endpoint` into one document. Examples
/// are taken in source-path order; with `renumber` their ids become
/// `<graph>/1`, `<graph>/2`, ... Identical prefix declarations are
/// written once and shared.
pub fn compile_target(
    corpus: &Corpus,
    endpoint: &str,
    renumber: bool,
    options: &CompileOptions,
) -> Result<Bundle, PublishError> {
    let graph = graph_iri(endpoint, options.graph_rule)?;
    let mut examples: Vec<&QueryExample> = corpus.for_target(endpoint).collect();
    examples.sort_by(|a, b| a.source_path.cmp(&b.source_path));

    let mut triples = Vec::new();
    let mut ids = Vec::new();
    let mut declarations: HashMap<(String, String), Term> = HashMap::new();
    let mut prefix_sets: HashMap<Vec<(String, String)>, Term> = HashMap::new();
    let mut uses_describe = false;

    for (ordinal, ex) in examples.iter().enumerate() {
        let subject = if renumber {
            Term::iri(format!("{graph}/{}", ordinal + 1))
        } else if let Some(label) = ex.id.strip_prefix("_:") {
            Term::BlankNode(format!("ex{ordinal}_{label}"))
        } else {
            Term::iri(ex.id.clone())
        };
        ids.push((ex.id.clone(), subject.to_string().trim_matches(['<', '>']).to_string()));
        uses_describe |= ex.query_type == QueryKind::Describe;

        let mut types = ex.declared_types.clone();
        if types.is_empty() {
            types = vec![executable_type(ex.query_type).to_string(), vocab::SH_SPARQL_EXECUTABLE.to_string()];
        }
        for t in types {
            triples.push(Triple::new(subject.clone(), vocab::RDF_TYPE, Term::iri(t)));
        }
        if !ex.prefix_decls.is_empty() {
            let key: Vec<(String, String)> = ex
                .prefix_decls
                .sorted()
                .iter()
                .map(|(l, n)| (l.to_string(), n.to_string()))
                .collect();
            let next = prefix_sets.len();
            let node = prefix_sets
                .entry(key.clone())
                .or_insert_with(|| Term::BlankNode(format!("prefixes{next}")))
                .clone();
            triples.push(Triple::new(subject.clone(), vocab::SH_PREFIXES, node));
        }
        for q in &ex.questions {
            let literal = match &q.lang {
                Some(lang) => Literal::lang(q.text.clone(), lang.clone()),
                None => Literal::simple(q.text.clone()),
            };
            triples.push(Triple::new(subject.clone(), vocab::RDFS_COMMENT, Term::Literal(literal)));
        }
        triples.push(Triple::new(
            subject.clone(),
            query_property(ex.query_type),
            Term::Literal(Literal::simple(ex.query_text.clone())),
        ));
        for target in &ex.targets {
            triples.push(Triple::new(subject.clone(), vocab::SCHEMA_TARGET, Term::iri(target.clone())));
        }
        for keyword in &ex.keywords {
            triples.push(Triple::new(
                subject.clone(),
                vocab::SCHEMA_KEYWORDS,
                Term::Literal(Literal::simple(keyword.clone())),
            ));
        }
    }

    let mut sets: Vec<(&Vec<(String, String)>, &Term)> = prefix_sets.iter().collect();
    sets.sort_by(|a, b| a.1.cmp(b.1));
    for (entries, node) in sets {
        for (label, namespace) in entries {
            let next = declarations.len();
            let decl = declarations
                .entry((label.clone(), namespace.clone()))
                .or_insert_with(|| Term::BlankNode(format!("decl{next}")))
                .clone();
            let fresh = !triples.iter().any(|t| t.subject == decl);
            triples.push(Triple::new(node.clone(), vocab::SH_DECLARE, decl.clone()));
            if fresh {
                triples.push(Triple::new(
                    decl.clone(),
                    vocab::SH_PREFIX,
                    Term::Literal(Literal::simple(label.clone())),
                ));
                triples.push(Triple::new(
                    decl,
                    vocab::SH_NAMESPACE,
                    Term::Literal(Literal::typed(namespace.clone(), vocab::XSD_ANY_URI)),
                ));
            }
        }
    }

    let mut prefixes = PrefixMap::new();
    if renumber {
        prefixes.insert("ex", format!("{graph}/"));
    }
    for (label, ns) in [
        ("rdf", vocab::RDF),
        ("rdfs", vocab::RDFS),
        ("schema", vocab::SCHEMA),
        ("sh", vocab::SH),
        ("xsd", vocab::XSD),
    ] {
        prefixes.insert(label, ns);
    }
    if uses_describe {
        prefixes.insert("spex", vocab::SPEX);
    }

    let mut warnings = Vec::new();
    if examples.is_empty() {
        warnings.push(format!("no examples target {endpoint}; the bundle is empty"));
    }
    let text = serialize_turtle(&triples, &prefixes, options.trig.then_some(graph.as_str()));
    Ok(Bundle {
        graph_iri: graph,
        text,
        example_count: examples.len(),
        ids,
        warnings,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SiteManifest {
    pub root_index: PathBuf,
    pub project_indexes: Vec<PathBuf>,
    /// `(example id, page)` pairs.
    pub pages: Vec<(String, PathBuf)>,
}

fn page_stem(ex: &QueryExample) -> String {
    let local = if ex.is_blank() { "" } else { local_name(&ex.id) };
    let stem = sanitize(local);
    if stem.is_empty() {
        "example".to_string()
    } else {
        stem
    }
}

fn markdown_link_text(text: &str) -> String {
    text.replace('\n', " ").replace('[', "\\[").replace(']', "\\]")
}

/// Writes `index.md`, `<project>/index.md` and one page per example.
/// Page names come from the id's local name; a clash gets `-2`, `-3`, ...
pub fn emit_site(corpus: &Corpus, out_dir: &Path) -> Result<SiteManifest, PublishError> {
    fs::create_dir_all(out_dir)?;
    let mut by_project: BTreeMap<&str, Vec<&QueryExample>> = BTreeMap::new();
    for ex in &corpus.examples {
        by_project.entry(ex.project.as_str()).or_default().push(ex);
    }

    let mut manifest = SiteManifest::default();
    let mut root = String::from("# SPARQL query examples\n\n");
    if !by_project.is_empty() {
        root.push_str("| Project | Examples |\n|---|---|\n");
    }
    for (project, examples) in &by_project {
        let dir_name = if project.is_empty() { "default".to_string() } else { sanitize(project) };
        let dir = out_dir.join(&dir_name);
        fs::create_dir_all(&dir)?;
        root.push_str(&format!("| [{project}]({dir_name}/index.md) | {} |\n", examples.len()));

        let mut index = format!("# {project}\n\n");
        let mut used: HashMap<String, usize> = HashMap::new();
        let mut sorted = examples.clone();
        sorted.sort_by(|a, b| a.id.cmp(&b.id).then_with(|| a.source_path.cmp(&b.source_path)));
        for ex in sorted {
            let stem = page_stem(ex);
            let n = used.entry(stem.clone()).or_insert(0);
            *n += 1;
            let file_name = if *n == 1 { format!("{stem}.md") } else { format!("{stem}-{n}.md") };
            let page = emit_markdown_page(ex, Some(&corpus.fallback_prefixes(ex)));
            let path = dir.join(&file_name);
            fs::write(&path, page)?;
            let title = ex.preferred_question().map_or(ex.id.as_str(), |q| q.text.as_str());
            index.push_str(&format!("- [{}]({file_name})\n", markdown_link_text(title)));
            manifest.pages.push((ex.id.clone(), path));
        }
        let index_path = dir.join("index.md");
        fs::write(&index_path, index)?;
        manifest.project_indexes.push(index_path);
    }
    let root_path = out_dir.join("index.md");
    fs::write(&root_path, root)?;
    manifest.root_index = root_path;
    Ok(manifest)
}

/// One entry of the JSON export; see `schemas/examples.schema.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct ExportedExample {
    pub id: String,
    pub question: String,
    pub lang: Option<String>,
    pub query: String,
    pub endpoints: Vec<String>,
    pub keywords: Vec<String>,
    pub category: String,
}

impl ExportedExample {
    pub fn from_example(ex: &QueryExample) -> Self {
        let preferred = ex.preferred_question();
        ExportedExample {
            id: ex.id.clone(),
            question: preferred.map(|q| q.text.clone()).unwrap_or_default(),
            lang: preferred.and_then(|q| q.lang.clone()),
            query: ex.query_text.clone(),
            endpoints: ex.targets.clone(),
            keywords: ex.keywords.clone(),
            category: ex.project.clone(),
        }
    }
}

/// Export entries sorted by (category, id).
pub fn export_examples<'a>(examples: impl IntoIterator<Item = &'a QueryExample>) -> Vec<ExportedExample> {
    let mut out: Vec<ExportedExample> = examples.into_iter().map(ExportedExample::from_example).collect();
    out.sort_by(|a, b| (&a.category, &a.id).cmp(&(&b.category, &b.id)));
    out
}

pub fn emit_json(corpus: &Corpus) -> String {
    serde_json::to_string_pretty(&export_examples(&corpus.examples)).expect("export serializes")
}
