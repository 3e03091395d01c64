use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use proptest::prelude::*;
use sparql_exemplar::rdf::{vocab, PrefixMap};
use sparql_exemplar::sparql::QueryKind;
use sparql_exemplar::store::{
    load_corpus, load_example_file, load_example_text, search, stats, Corpus, LoadError, Question, SearchField,
};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn corpus() -> Corpus {
    load_corpus(&fixtures().join("corpus")).unwrap()
}

fn ttl_files(dir: &Path) -> Vec<PathBuf> {
    walk(dir)
        .into_iter()
        .filter(|p| p.extension().is_some_and(|x| x == "ttl") && p.file_name().unwrap() != "prefixes.ttl")
        .collect()
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out
}

#[test]
fn listing_one_loads_exactly() {
    let path = fixtures().join("corpus/examples/UniProt/001.ttl");
    let ex = load_example_file(&path, &PrefixMap::new()).unwrap();
    assert_eq!(ex.id, "https://sparql.uniprot.org/.well-known/sparql-examples/001");
    assert_eq!(ex.query_type, QueryKind::Select);
    assert_eq!(
        ex.questions,
        vec![Question {
            text: "Select all taxa from the UniProt taxonomy".into(),
            lang: Some("en".into())
        }]
    );
    assert_eq!(ex.targets, vec!["https://sparql.uniprot.org/sparql/".to_string()]);
    assert_eq!(ex.keywords, vec!["taxa".to_string()]);
    assert_eq!(ex.project, "UniProt");
    assert!(!ex.declared_federated);
    assert!(ex.query_text.starts_with("PREFIX up: <http://purl.uniprot.org/core/>\nSELECT ?taxon"));
}

#[test]
fn bundled_sample_loads_every_file() {
    let corpus = corpus();
    let on_disk = ttl_files(&fixtures().join("corpus/examples")).len();
    assert!(on_disk >= 20);
    assert!(corpus.load_errors.is_empty(), "{:?}", corpus.load_errors);
    assert_eq!(corpus.examples.len(), on_disk);
    assert_eq!(corpus.projects, ["Bgee", "OMA", "Rhea", "SwissLipids", "UniProt"]);
    assert!(corpus.duplicates.is_empty());
    assert_eq!(corpus.prefix_registry.get("up"), Some("http://purl.uniprot.org/core/"));
}

#[test]
fn three_files_in_two_projects() {
    let dir = tempfile::tempdir().unwrap();
    let src = fixtures().join("corpus/examples");
    for (project, file) in [("UniProt", "001.ttl"), ("UniProt", "002.ttl"), ("Rhea", "001.ttl")] {
        fs::create_dir_all(dir.path().join(project)).unwrap();
        fs::copy(src.join(project).join(file), dir.path().join(project).join(file)).unwrap();
    }
    let corpus = load_corpus(dir.path()).unwrap();
    assert_eq!(corpus.examples.len(), 3);
    assert_eq!(corpus.projects.len(), 2);
}

#[test]
fn empty_directory_gives_empty_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = load_corpus(dir.path()).unwrap();
    assert!(corpus.examples.is_empty() && corpus.projects.is_empty() && corpus.load_errors.is_empty());
}

#[test]
fn missing_root_is_an_error() {
    assert!(load_corpus(Path::new("/definitely/not/here")).is_err());
}

fn load(text: &str) -> Result<sparql_exemplar::store::QueryExample, LoadError> {
    load_example_text(text, Path::new("Test/x.ttl"), "Test", &PrefixMap::new())
}

const HEAD: &str = "@prefix sh: <http://www.w3.org/ns/shacl#> .\n\
@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .\n\
@prefix schema: <https://schema.org/> .\n";

#[test]
fn select_and_ask_together_is_an_error() {
    let text = format!(
        "{HEAD}<http://e/1> a sh:SPARQLExecutable ; rdfs:comment \"q\"@en ;\n\
         sh:select \"SELECT * WHERE {{ ?s ?p ?o }}\" ; sh:ask \"ASK {{ }}\" ; schema:target <http://e/sparql> ."
    );
    assert!(matches!(load(&text), Err(LoadError::MultipleQueries(_))));
}

#[test]
fn declared_type_must_match_query_property() {
    let text = format!(
        "{HEAD}<http://e/1> a sh:SPARQLSelectExecutable, sh:SPARQLExecutable ; rdfs:comment \"q\"@en ;\n\
         sh:ask \"ASK {{ }}\" ; schema:target <http://e/sparql> ."
    );
    assert!(matches!(load(&text), Err(LoadError::QueryTypeMismatch { .. })));
}

#[test]
fn no_executable_and_missing_query() {
    let text = format!("{HEAD}<http://e/1> rdfs:comment \"q\"@en .");
    assert!(matches!(load(&text), Err(LoadError::NoExecutable)));
    let text = format!("{HEAD}<http://e/1> a sh:SPARQLExecutable ; rdfs:comment \"q\"@en .");
    assert!(matches!(load(&text), Err(LoadError::MissingQuery)));
}

#[test]
fn literal_target_is_malformed() {
    let text = format!(
        "{HEAD}<http://e/1> a sh:SPARQLExecutable ; rdfs:comment \"q\"@en ;\n\
         sh:select \"SELECT * WHERE {{ ?s ?p ?o }}\" ; schema:target \"http://e/sparql\" ."
    );
    assert!(matches!(load(&text), Err(LoadError::MalformedTarget(_))));
}

#[test]
fn federated_markers() {
    let corpus = corpus();
    let federated: BTreeSet<&str> = corpus
        .examples
        .iter()
        .filter(|e| e.declared_federated)
        .map(|e| e.id.as_str())
        .collect();
    assert_eq!(federated.len(), 5);
    assert!(federated.contains("https://sparql.rhea-db.org/.well-known/sparql-examples/003"));
}

#[test]
fn english_question_is_preferred() {
    let corpus = corpus();
    let ex = corpus.get("https://www.bgee.org/.well-known/sparql-examples/001").unwrap();
    assert_eq!(ex.questions.len(), 2);
    assert_eq!(ex.preferred_question().unwrap().lang.as_deref(), Some("en"));
}

#[test]
fn loading_is_deterministic() {
    let path = fixtures().join("corpus/examples/SwissLipids/001.ttl");
    let a = load_example_file(&path, &PrefixMap::new()).unwrap();
    let b = load_example_file(&path, &PrefixMap::new()).unwrap();
    assert_eq!(a, b);
}

/// Independent scan over the raw records.
fn brute_force(corpus: &Corpus, needle: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for ex in &corpus.examples {
        for q in &ex.questions {
            if q.text.contains(needle) {
                out.insert(ex.id.clone());
            }
        }
    }
    out
}

#[test]
fn search_matches_brute_force_and_is_case_sensitive() {
    let corpus = corpus();
    let hits: BTreeSet<String> = search(&corpus, "species", &[SearchField::Question])
        .into_iter()
        .map(|e| e.id.clone())
        .collect();
    assert_eq!(hits, brute_force(&corpus, "species"));
    assert_eq!(hits.len(), 3);
    assert!(search(&corpus, "Species", &[SearchField::Question]).is_empty());
    assert!(search(&corpus, "zzz-absent", &[SearchField::Question]).is_empty());
}

#[test]
fn search_other_fields() {
    let corpus = corpus();
    let by_query = search(&corpus, "SERVICE", &[SearchField::Query]);
    assert_eq!(by_query.len(), 5);
    let by_keyword = search(&corpus, "taxa", &[SearchField::Keywords]);
    let ids: Vec<&str> = by_keyword.iter().map(|e| e.id.as_str()).collect();
    assert_eq!(
        ids,
        [
            "https://sparql.uniprot.org/.well-known/sparql-examples/001",
            "https://sparql.uniprot.org/.well-known/sparql-examples/002",
            "https://sparql.uniprot.org/.well-known/sparql-examples/006"
        ]
    );
}

#[test]
fn search_results_are_sorted_by_id() {
    let corpus = corpus();
    let hits = search(&corpus, "e", SearchField::ALL.as_slice());
    let ids: Vec<&String> = hits.iter().map(|e| &e.id).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
}

#[test]
fn stats_listing_one_only() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir_all(dir.path().join("UniProt")).unwrap();
    fs::copy(
        fixtures().join("corpus/examples/UniProt/001.ttl"),
        dir.path().join("UniProt/001.ttl"),
    )
    .unwrap();
    let s = stats(&load_corpus(dir.path()).unwrap());
    assert_eq!(s.total.example_count, 1);
    assert_eq!(s.total.mean_triple_patterns, 1.0);
    assert_eq!(s.total.federated_count, 0);
}

#[test]
fn stats_mean_of_one_and_three() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir_all(dir.path().join("P")).unwrap();
    for (name, body) in [("a", "?s ?p ?o ."), ("b", "?s ?p ?o . ?o ?q ?r . ?r ?t ?u .")] {
        let text = format!(
            "{HEAD}<http://e/{name}> a sh:SPARQLExecutable, sh:SPARQLSelectExecutable ; rdfs:comment \"q\"@en ;\n\
             sh:select \"SELECT * WHERE {{ {body} }}\" ; schema:target <http://e/sparql> ."
        );
        fs::write(dir.path().join(format!("P/{name}.ttl")), text).unwrap();
    }
    let s = stats(&load_corpus(dir.path()).unwrap());
    assert_eq!(s.projects["P"].mean_triple_patterns, 2.0);
}

#[test]
fn stats_over_fixture_corpus() {
    let s = stats(&corpus());
    assert_eq!(s.total.example_count, 21);
    assert_eq!(s.total.federated_count, 5);
    assert_eq!(s.total.unparsable, 0, "{:?}", s.excluded);
    let per_project: usize = s.projects.values().map(|p| p.example_count).sum();
    assert_eq!(per_project, 21);
}

#[test]
fn duplicate_ids_are_reported() {
    let corpus = load_corpus(&fixtures().join("invalid/r8")).unwrap();
    assert_eq!(corpus.duplicates.len(), 1);
    assert_eq!(corpus.duplicates[0].files.len(), 2);
}

#[test]
fn undeclared_turtle_prefix_uses_project_prefixes() {
    let text = "<http://e/1> a sh:SPARQLExecutable, sh:SPARQLSelectExecutable ; sh:select \"SELECT * WHERE { ?s ?p ?o }\" .";
    let project: PrefixMap = [("sh", vocab::SH)].into_iter().collect();
    let ex = load_example_text(text, Path::new("P/x.ttl"), "P", &project).unwrap();
    assert_eq!(ex.id, "http://e/1");
    assert!(load_example_text(text, Path::new("P/x.ttl"), "P", &PrefixMap::new()).is_err());
}

proptest! {
    #[test]
    fn search_agrees_with_scan(needle in "[a-zA-Z ]{1,6}") {
        let corpus = corpus();
        let hits: BTreeSet<String> = search(&corpus, &needle, &[SearchField::Question])
            .into_iter()
            .map(|e| e.id.clone())
            .collect();
        prop_assert_eq!(hits, brute_force(&corpus, &needle));
    }
}
