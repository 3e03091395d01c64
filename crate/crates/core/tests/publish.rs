mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use common::fixtures;
use proptest::prelude::*;
use sparql_exemplar::publish::{
    compile_target, emit_json, emit_site, graph_iri, CompileOptions, ExportedExample, GraphIriRule,
};
use sparql_exemplar::rdf::{parse_trig, PrefixMap};
use sparql_exemplar::store::{load_bundle, load_corpus, load_example_text, Corpus, QueryExample};

const UNIPROT: &str = "https://sparql.uniprot.org/sparql/";

fn corpus() -> Corpus {
    load_corpus(&fixtures().join("corpus")).unwrap()
}

#[test]
fn graph_iri_rules() {
    let strip = GraphIriRule::StripSparqlPath;
    assert_eq!(
        graph_iri(UNIPROT, strip).unwrap(),
        "https://sparql.uniprot.org/.well-known/sparql-examples"
    );
    assert_eq!(
        graph_iri("https://sparql.rhea-db.org/sparql", strip).unwrap(),
        "https://sparql.rhea-db.org/.well-known/sparql-examples"
    );
    assert_eq!(
        graph_iri("https://www.bgee.org/sparql/", GraphIriRule::KeepPath).unwrap(),
        "https://www.bgee.org/sparql/.well-known/sparql-examples"
    );
    assert_eq!(
        graph_iri("http://localhost:7200/repositories/kg", strip).unwrap(),
        "http://localhost:7200/repositories/kg/.well-known/sparql-examples"
    );
    assert!(graph_iri("ftp://example.org/sparql", strip).is_err());
    assert!(graph_iri("not a url", strip).is_err());
}

#[test]
fn renumbered_listing_one_gets_ordinal_one() {
    let dir = fixtures().join("listing1");
    let corpus = load_corpus(&dir).unwrap();
    let bundle = compile_target(&corpus, UNIPROT, true, &CompileOptions::default()).unwrap();
    assert_eq!(bundle.example_count, 1);
    assert_eq!(bundle.ids[0].1, "https://sparql.uniprot.org/.well-known/sparql-examples/1");
    let loaded = load_bundle(&bundle.text, Path::new("bundle.ttl"), "UniProt").unwrap();
    assert_eq!(loaded[0].id, "https://sparql.uniprot.org/.well-known/sparql-examples/1");
}

/// Fields that must survive a bundle round trip.
fn essence(ex: &QueryExample) -> impl PartialEq + std::fmt::Debug {
    let mut keywords = ex.keywords.clone();
    keywords.sort();
    let mut questions: Vec<(String, Option<String>)> =
        ex.questions.iter().map(|q| (q.text.clone(), q.lang.clone())).collect();
    questions.sort();
    let mut types = ex.declared_types.clone();
    types.sort();
    let mut targets = ex.targets.clone();
    targets.sort();
    (
        ex.query_type,
        ex.query_text.clone(),
        questions,
        targets,
        keywords,
        types,
        ex.declared_federated,
        ex.prefix_decls.sorted(),
    )
}

fn round_trip(corpus: &Corpus, endpoint: &str, renumber: bool, trig: bool) {
    let options = CompileOptions {
        trig,
        ..CompileOptions::default()
    };
    let bundle = compile_target(corpus, endpoint, renumber, &options).unwrap();
    let loaded = load_bundle(&bundle.text, Path::new("bundle.ttl"), "x").unwrap();
    let mut originals: Vec<&QueryExample> = corpus.for_target(endpoint).collect();
    originals.sort_by(|a, b| a.source_path.cmp(&b.source_path));
    assert_eq!(loaded.len(), originals.len(), "{endpoint}");
    for (old, new) in &bundle.ids {
        let original = originals.iter().find(|e| &e.id == old).unwrap();
        let reloaded = loaded.iter().find(|e| &e.id == new).unwrap_or_else(|| panic!("{new} missing"));
        assert_eq!(essence(original), essence(reloaded), "{old}");
    }
}

#[test]
fn bundles_round_trip_for_every_endpoint() {
    let corpus = corpus();
    let endpoints: BTreeSet<&str> = corpus.examples.iter().flat_map(|e| e.targets.iter().map(String::as_str)).collect();
    assert_eq!(endpoints.len(), 5);
    for endpoint in endpoints {
        for (renumber, trig) in [(true, false), (false, false), (true, true)] {
            round_trip(&corpus, endpoint, renumber, trig);
        }
    }
}

#[test]
fn renumbering_is_a_bijection_in_source_order() {
    let corpus = corpus();
    let bundle = compile_target(&corpus, UNIPROT, true, &CompileOptions::default()).unwrap();
    let n = bundle.ids.len();
    assert_eq!(n, 7);
    let expected: Vec<String> = (1..=n)
        .map(|i| format!("https://sparql.uniprot.org/.well-known/sparql-examples/{i}"))
        .collect();
    let got: Vec<String> = bundle.ids.iter().map(|(_, new)| new.clone()).collect();
    assert_eq!(got, expected);
    let originals: Vec<&String> = bundle.ids.iter().map(|(old, _)| old).collect();
    let mut sorted = originals.clone();
    sorted.sort();
    assert_eq!(originals, sorted, "fixture ids follow file order");
}

#[test]
fn trig_output_names_the_graph() {
    let corpus = corpus();
    let options = CompileOptions {
        trig: true,
        ..CompileOptions::default()
    };
    let bundle = compile_target(&corpus, UNIPROT, true, &options).unwrap();
    let (quads, _) = parse_trig(&bundle.text, None).unwrap();
    assert!(!quads.is_empty());
    assert!(quads
        .iter()
        .all(|q| q.graph.as_deref() == Some("https://sparql.uniprot.org/.well-known/sparql-examples")));
}

#[test]
fn prefix_declarations_are_shared() {
    let text = |id: &str| {
        format!(
            "@prefix sh: <http://www.w3.org/ns/shacl#> .\n@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .\n\
             @prefix schema: <https://schema.org/> .\n@prefix xsd: <http://www.w3.org/2001/XMLSchema#> .\n\
             <http://e.org/{id}> a sh:SPARQLExecutable, sh:SPARQLSelectExecutable ; rdfs:comment \"q\"@en ;\n\
             sh:prefixes [ sh:declare [ sh:prefix \"up\" ; sh:namespace \"http://purl.uniprot.org/core/\"^^xsd:anyURI ] ] ;\n\
             sh:select \"SELECT * WHERE {{ ?s up:p ?o }}\" ; schema:target <http://e.org/sparql> ."
        )
    };
    let examples: Vec<QueryExample> = ["1", "2", "3"]
        .iter()
        .map(|id| load_example_text(&text(id), Path::new(&format!("P/{id}.ttl")), "P", &PrefixMap::new()).unwrap())
        .collect();
    assert!(examples.iter().all(|e| e.prefix_decls.get("up").is_some()));
    let corpus = Corpus::from_examples(examples, PrefixMap::new());
    let bundle = compile_target(&corpus, "http://e.org/sparql", false, &CompileOptions::default()).unwrap();
    assert_eq!(bundle.text.matches("http://purl.uniprot.org/core/").count(), 1, "{}", bundle.text);
    assert_eq!(bundle.text.matches("sh:prefixes").count(), 3);
    round_trip(&corpus, "http://e.org/sparql", false, false);
}

#[test]
fn empty_bundle_warns_and_stays_valid() {
    let corpus = corpus();
    let bundle = compile_target(&corpus, "https://nowhere.example/sparql", true, &CompileOptions::default()).unwrap();
    assert_eq!(bundle.example_count, 0);
    assert_eq!(bundle.warnings.len(), 1);
    let (quads, _) = parse_trig(&bundle.text, None).unwrap();
    assert!(quads.is_empty());
}

fn count_md(dir: &Path) -> usize {
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            n += count_md(&path);
        } else if path.extension().is_some_and(|x| x == "md") {
            n += 1;
        }
    }
    n
}

#[test]
fn site_for_three_examples_in_two_projects() {
    let src = tempfile::tempdir().unwrap();
    let base = fixtures().join("corpus/examples");
    for (project, file) in [("UniProt", "001.ttl"), ("UniProt", "002.ttl"), ("Rhea", "001.ttl")] {
        fs::create_dir_all(src.path().join(project)).unwrap();
        fs::copy(base.join(project).join(file), src.path().join(project).join(file)).unwrap();
    }
    let corpus = load_corpus(src.path()).unwrap();
    let out = tempfile::tempdir().unwrap();
    let manifest = emit_site(&corpus, out.path()).unwrap();
    assert_eq!(manifest.pages.len(), 3);
    assert_eq!(manifest.project_indexes.len(), 2);
    assert_eq!(count_md(out.path()), 6);
    let root = fs::read_to_string(out.path().join("index.md")).unwrap();
    assert!(root.contains("| [UniProt](UniProt/index.md) | 2 |"));
    assert!(root.contains("| [Rhea](Rhea/index.md) | 1 |"));
    let index = fs::read_to_string(out.path().join("UniProt/index.md")).unwrap();
    assert!(index.contains("(001.md)") && index.contains("(002.md)"));
}

#[test]
fn site_for_empty_corpus_is_root_only() {
    let out = tempfile::tempdir().unwrap();
    let manifest = emit_site(&Corpus::default(), out.path()).unwrap();
    assert!(manifest.pages.is_empty());
    assert_eq!(count_md(out.path()), 1);
}

#[test]
fn colliding_page_names_get_suffixes() {
    let corpus = corpus();
    let mut examples = corpus.examples.clone();
    let mut twin = examples[0].clone();
    twin.id = "https://other.example.org/examples/001".into();
    twin.project = examples[0].project.clone();
    examples.push(twin);
    let corpus = Corpus::from_examples(examples, PrefixMap::new());
    let out = tempfile::tempdir().unwrap();
    emit_site(&corpus, out.path()).unwrap();
    let project = &corpus.examples[0].project;
    let dir = out.path().join(project);
    assert!(dir.join("001.md").exists());
    assert!(dir.join("001-2.md").exists());
}

#[test]
fn json_export_listing_one() {
    let corpus = load_corpus(&fixtures().join("listing1")).unwrap();
    let parsed: Vec<ExportedExample> = serde_json::from_str(&emit_json(&corpus)).unwrap();
    assert_eq!(parsed.len(), 1);
    assert_eq!(parsed[0].question, "Select all taxa from the UniProt taxonomy");
    assert_eq!(parsed[0].category, "UniProt");
    assert_eq!(parsed[0].lang.as_deref(), Some("en"));
    assert_eq!(parsed[0].endpoints, [UNIPROT]);
}

#[test]
fn json_export_empty() {
    assert_eq!(emit_json(&Corpus::default()), "[]");
}

#[test]
fn json_export_is_sorted_deterministic_and_schema_valid() {
    let corpus = corpus();
    let a = emit_json(&corpus);
    assert_eq!(a, emit_json(&corpus));
    let value: serde_json::Value = serde_json::from_str(&a).unwrap();
    let schema: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas/examples.schema.json")).unwrap(),
    )
    .unwrap();
    assert!(jsonschema::validator_for(&schema).unwrap().is_valid(&value));
    let parsed: Vec<ExportedExample> = serde_json::from_value(value).unwrap();
    let keys: Vec<(String, String)> = parsed.iter().map(|e| (e.category.clone(), e.id.clone())).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(parsed.len(), 21);
}

proptest! {
    #[test]
    fn graph_iri_has_one_slash_at_the_join(host in "[a-z]{1,8}\\.org", path in "(/[a-z]{1,6}){0,3}", slash in any::<bool>()) {
        let endpoint = format!("https://{host}{path}{}", if slash { "/" } else { "" });
        let iri = graph_iri(&endpoint, GraphIriRule::StripSparqlPath).unwrap();
        prop_assert!(iri.ends_with("/.well-known/sparql-examples"));
        prop_assert!(!iri.contains("//.well-known"));
        prop_assert!(!iri.trim_end_matches("/.well-known/sparql-examples").ends_with("/sparql"));
    }
}
