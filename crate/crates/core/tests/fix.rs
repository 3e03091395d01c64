mod common;

use std::collections::BTreeMap;
use std::fs;

use common::{evaluate, fixtures, Solution};
use sparql_exemplar::fix::{
    default_hint_namespaces, fix_all, inject_prefixes, rewrite_named_subqueries, strip_query_hints, FixError,
    FixKind,
};
use sparql_exemplar::rdf::{parse_turtle, Literal, PrefixMap, Term};
use sparql_exemplar::sparql::{count_triple_patterns, parse_query, Dialect};
use sparql_exemplar::store::load_corpus;

fn read(name: &str) -> String {
    fs::read_to_string(fixtures().join("fix").join(name)).unwrap()
}

fn registry() -> PrefixMap {
    [("up", "http://purl.uniprot.org/core/"), ("ex", "http://example.org/")]
        .into_iter()
        .collect()
}

fn ex(local: &str) -> Term {
    Term::iri(format!("http://example.org/{local}"))
}

#[test]
fn named_subquery_rewrites_to_strict_sparql() {
    let (text, report) = fix_all(&read("named_subquery.rq"), &registry(), &default_hint_namespaces()).unwrap();
    assert!(!text.contains("WITH") && !text.contains("INCLUDE"), "{text}");
    assert_eq!(report.count(FixKind::NamedSubquery), 1);
    let query = parse_query(&text, None, Dialect::Strict).unwrap();

    let (data, _) = parse_turtle(&read("named_subquery.ttl"), None).unwrap();
    assert!(data.len() <= 5);
    // People are alice and bob; only alice has a name.
    let expected = vec![Solution::from([
        ("name".to_string(), Term::Literal(Literal::simple("Alice"))),
        ("person".to_string(), ex("alice")),
    ])];
    assert_eq!(evaluate(&query, &data), expected);
}

#[test]
fn nested_named_subqueries_are_inlined() {
    let (text, report) = rewrite_named_subqueries(&read("named_subquery_nested.rq")).unwrap();
    let query = parse_query(&text, None, Dialect::Strict).unwrap();
    assert_eq!(report.count(FixKind::NamedSubquery), 3);

    let (data, _) = parse_turtle(&read("named_subquery.ttl"), None).unwrap();
    // bob knows alice and both are people.
    let expected = vec![BTreeMap::from([("a".to_string(), ex("bob")), ("b".to_string(), ex("alice"))])];
    assert_eq!(evaluate(&query, &data), expected);
}

#[test]
fn named_subquery_errors() {
    let undeclared = "SELECT * WHERE { INCLUDE %nope }";
    assert_eq!(
        rewrite_named_subqueries(undeclared).unwrap_err(),
        FixError::UndeclaredNamedSet("nope".into())
    );
    let cyclic = "SELECT * WITH { SELECT * WHERE { INCLUDE %a } } AS %a WHERE { INCLUDE %a }";
    assert!(matches!(rewrite_named_subqueries(cyclic), Err(FixError::CyclicNamedSet(_))));
    let twice = "SELECT * WITH { SELECT * WHERE { ?s ?p ?o } } AS %a WITH { SELECT * WHERE { ?s ?p ?o } } AS %a \
                 WHERE { INCLUDE %a }";
    assert!(matches!(rewrite_named_subqueries(twice), Err(FixError::DuplicateNamedSet(_))));
}

#[test]
fn unused_named_subquery_warns() {
    let text = "SELECT * WITH { SELECT ?s WHERE { ?s ?p ?o } } AS %unused WHERE { ?s ?p ?o }";
    let (out, report) = rewrite_named_subqueries(text).unwrap();
    assert!(!out.contains("WITH"));
    assert_eq!(report.warnings.len(), 1);
}

fn hint_delta(name: &str, expected: usize) {
    let text = read(name);
    let before = parse_query(&text, None, Dialect::Strict).unwrap();
    let (after, report) = strip_query_hints(&before, &default_hint_namespaces());
    assert_eq!(report.count(FixKind::HintTriples), expected, "{name}");
    assert_eq!(count_triple_patterns(&before) - count_triple_patterns(&after), expected, "{name}");

    let (fixed, _) = fix_all(&text, &registry(), &default_hint_namespaces()).unwrap();
    let reparsed = parse_query(&fixed, None, Dialect::Strict).unwrap();
    assert_eq!(count_triple_patterns(&reparsed), count_triple_patterns(&before) - expected);
    assert_eq!(reparsed, after);
}

#[test]
fn hint_stripping_removes_exactly_the_hints() {
    hint_delta("hints_blazegraph.rq", 2);
    hint_delta("hints_neptune.rq", 2);
}

#[test]
fn hints_outside_the_namespaces_are_kept() {
    let text = read("hints_blazegraph.rq");
    let query = parse_query(&text, None, Dialect::Strict).unwrap();
    let (same, report) = strip_query_hints(&query, &["http://other.example/".to_string()]);
    assert_eq!(same, query);
    assert!(!report.changed());
}

#[test]
fn prefix_injection() {
    let text = read("missing_prefix.rq");
    let (fixed, report) = fix_all(&text, &registry(), &default_hint_namespaces()).unwrap();
    assert!(fixed.starts_with("PREFIX up: <http://purl.uniprot.org/core/>\n"));
    assert_eq!(report.count(FixKind::PrefixInjection), 1);
    parse_query(&fixed, None, Dialect::Strict).unwrap();

    let (_, report) = inject_prefixes(&text, &PrefixMap::new()).unwrap();
    assert_eq!(report.unresolved_prefixes, ["up"]);
    assert!(matches!(
        fix_all(&text, &PrefixMap::new(), &default_hint_namespaces()),
        Err(FixError::Unparsable(_))
    ));
}

#[test]
fn combined_fixes() {
    let (fixed, report) = fix_all(&read("combined.rq"), &registry(), &default_hint_namespaces()).unwrap();
    assert_eq!(report.count(FixKind::NamedSubquery), 1);
    assert_eq!(report.count(FixKind::PrefixInjection), 1);
    assert_eq!(report.count(FixKind::HintTriples), 1);
    let query = parse_query(&fixed, None, Dialect::Strict).unwrap();
    assert_eq!(count_triple_patterns(&query), 2);
}

#[test]
fn compliant_text_is_untouched() {
    let text = read("compliant.rq");
    let (fixed, report) = fix_all(&text, &registry(), &default_hint_namespaces()).unwrap();
    assert_eq!(fixed, text);
    assert!(!report.changed());
}

fn all_fixable_texts() -> Vec<(String, String)> {
    let mut out = Vec::new();
    for dir in ["fix", "queries"] {
        for entry in fs::read_dir(fixtures().join(dir)).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|x| x == "rq") {
                out.push((path.display().to_string(), fs::read_to_string(&path).unwrap()));
            }
        }
    }
    let corpus = load_corpus(&fixtures().join("corpus")).unwrap();
    for ex in &corpus.examples {
        out.push((ex.id.clone(), ex.query_text.clone()));
    }
    out.sort();
    out
}

#[test]
fn fix_all_is_idempotent_on_every_fixture() {
    let corpus = load_corpus(&fixtures().join("corpus")).unwrap();
    let mut registry = registry();
    registry.merge_missing(&corpus.prefix_registry);
    let texts = all_fixable_texts();
    assert!(texts.len() > 90);
    for (name, text) in texts {
        let (once, _) = fix_all(&text, &registry, &default_hint_namespaces()).unwrap_or_else(|e| panic!("{name}: {e}"));
        let (twice, report) = fix_all(&once, &registry, &default_hint_namespaces()).unwrap();
        assert_eq!(once, twice, "{name}");
        assert!(!report.changed(), "{name}: {:?}", report.applied);
    }
}
