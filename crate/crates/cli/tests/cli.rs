use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use sparql_exemplar::mock::{MockConfig, MockEndpoint};
use sparql_exemplar::publish::{graph_iri, GraphIriRule};
use sparql_exemplar::rdf::PrefixMap;
use sparql_exemplar::sparql::{parse_query, Dialect};
use sparql_exemplar::store::{load_bundle, load_example_file};
use sparql_exemplar_cli::replace_query_literal;

fn core() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core")
}

fn fixtures() -> PathBuf {
    core().join("tests/fixtures")
}

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sparql-exemplar"));
    cmd.env_remove("SPARQL_EXEMPLAR_TIMEOUT");
    cmd
}

fn exec(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(output: &Output) -> i32 {
    output.status.code().unwrap()
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn fx(path: &str) -> String {
    fixtures().join(path).display().to_string()
}

fn schema_valid(name: &str, value: &Value) -> bool {
    let text = fs::read_to_string(core().join("schemas").join(name)).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap())
        .unwrap()
        .is_valid(value)
}

#[test]
fn validate_listing_one_exits_zero() {
    let out = exec(&["validate", &fx("listing1")]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("PASSED"));
}

#[test]
fn validate_r6_exits_one_and_prints_the_finding() {
    let out = exec(&["validate", &fx("invalid/r6")]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("R6"), "{}", stdout(&out));
}

#[test]
fn every_rule_fixture_fails_validation() {
    for rule in 1..=8 {
        let out = exec(&["validate", &fx(&format!("invalid/r{rule}"))]);
        assert_eq!(code(&out), 1, "r{rule}");
        assert!(stdout(&out).contains(&format!("R{rule}")), "r{rule}: {}", stdout(&out));
    }
    assert_eq!(code(&exec(&["validate", &fx("corpus")])), 0);
}

#[test]
fn validate_json_matches_the_schema() {
    for (dir, expected) in [("invalid/r3", 1), ("listing1", 0)] {
        let out = exec(&["validate", &fx(dir), "--json"]);
        assert_eq!(code(&out), expected);
        let value: Value = serde_json::from_str(&stdout(&out)).unwrap();
        assert!(schema_valid("validation-report.schema.json", &value), "{value}");
        assert_eq!(value["passed"], expected == 0);
    }
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["validate", "x", "--bogus"],
        vec![],
        vec!["frobnicate"],
        vec!["compile", "x", "--out", "y"],
        vec!["search", "x"],
    ] {
        let out = exec(&args);
        assert_eq!(code(&out), 2, "{args:?}");
        assert!(!stderr(&out).is_empty());
    }
    assert_eq!(code(&exec(&["--help"])), 0);
    assert_eq!(code(&exec(&["--version"])), 0);
}

#[test]
fn bad_timeout_from_the_environment_is_a_usage_error() {
    let out = bin()
        .env("SPARQL_EXEMPLAR_TIMEOUT", "soon")
        .args(["validate", &fx("listing1")])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn operational_failure_exits_one_with_json_stderr() {
    let out = exec(&["validate", "/no/such/root"]);
    assert_eq!(code(&out), 1);
    let value: Value = serde_json::from_str(stderr(&out).trim()).unwrap();
    assert_eq!(value["command"], "validate");
    assert!(value["error"].is_string());
}

#[test]
fn network_subcommands_need_explicit_opt_in() {
    let out = exec(&["test-queries", &fx("corpus")]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--remote"));
    assert_eq!(code(&exec(&["test-federation", &fx("corpus")])), 2);
}

fn example_ttl(target: &str, query: &str, extra: &str) -> String {
    format!(
        "@prefix sh: <http://www.w3.org/ns/shacl#> .\n@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .\n\
         @prefix schema: <https://schema.org/> .\n@prefix xsd: <http://www.w3.org/2001/XMLSchema#> .\n\
         <http://e.org/1> a sh:SPARQLExecutable, sh:SPARQLSelectExecutable ;\n  rdfs:comment \"q\"@en ;{extra}\n  \
         sh:select \"\"\"{query}\"\"\" ;\n  schema:target <{target}> .\n"
    )
}

#[test]
fn stats_prints_mean_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir_all(dir.path().join("P")).unwrap();
    for (name, body) in [("a", "?s ?p ?o ."), ("b", "?s ?p ?o . ?o ?q ?r . ?r ?t ?u .")] {
        let text = example_ttl("http://e.org/sparql", &format!("SELECT * WHERE {{ {body} }}"), "")
            .replace("http://e.org/1", &format!("http://e.org/{name}"));
        fs::write(dir.path().join(format!("P/{name}.ttl")), text).unwrap();
    }
    let out = exec(&["stats", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let total = stdout(&out).lines().find(|l| l.starts_with("total")).unwrap().to_string();
    assert!(total.contains("2.0"), "{}", stdout(&out));

    let out = exec(&["stats", dir.path().to_str().unwrap(), "--json"]);
    let value: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(value["total"]["mean_triple_patterns"], 2.0);
}

#[test]
fn search_lists_matching_ids() {
    let out = exec(&["search", &fx("corpus"), "--q", "species"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).lines().count(), 3);
    let out = exec(&["search", &fx("corpus"), "--q", "SERVICE", "--fields", "query", "--json"]);
    let value: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(value.as_array().unwrap().len(), 5);
    assert_eq!(code(&exec(&["search", &fx("corpus"), "--q", "x", "--fields", "bogus"])), 2);
}

#[test]
fn compile_export_and_viz_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("uniprot.ttl");
    let out = exec(&[
        "compile",
        &fx("corpus"),
        "--endpoint",
        "https://sparql.uniprot.org/sparql/",
        "--renumber",
        "--out",
        bundle.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(&bundle).unwrap();
    let loaded = load_bundle(&text, &bundle, "UniProt").unwrap();
    assert_eq!(loaded[0].id, "https://sparql.uniprot.org/.well-known/sparql-examples/1");
    assert_eq!(loaded.len(), 7);

    let empty = dir.path().join("empty.ttl");
    let out = exec(&["compile", &fx("corpus"), "--endpoint", "https://x.example/sparql", "--out", empty.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(stderr(&out).contains("warning"));

    let json = dir.path().join("examples.json");
    assert_eq!(code(&exec(&["export-json", &fx("corpus"), "--out", json.to_str().unwrap()])), 0);
    let value: Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert!(schema_valid("examples.schema.json", &value));
    assert_eq!(value.as_array().unwrap().len(), 21);

    let site = dir.path().join("site");
    let out = exec(&["viz", &fx("corpus"), "--out", site.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("21 page(s), 5 project index(es)"), "{}", stdout(&out));
    assert!(site.join("index.md").exists());
}

fn fix_workspace() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("prefixes.ttl"),
        fs::read_to_string(fixtures().join("corpus/examples/UniProt/prefixes.ttl")).unwrap(),
    )
    .unwrap();
    let file = dir.path().join("q.rq");
    fs::copy(fixtures().join("fix/missing_prefix.rq"), &file).unwrap();
    (dir, file)
}

#[test]
fn fix_dry_run_prints_a_diff_and_leaves_the_file() {
    let (_dir, file) = fix_workspace();
    let before = fs::read_to_string(&file).unwrap();
    let out = exec(&["fix", file.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("+PREFIX up: <http://purl.uniprot.org/core/>"), "{}", stdout(&out));
    assert!(stdout(&out).contains("1 query would change"));
    assert_eq!(fs::read_to_string(&file).unwrap(), before);
}

#[test]
fn fix_write_rewrites_and_second_run_is_a_no_op() {
    let (_dir, file) = fix_workspace();
    let out = exec(&["fix", file.to_str().unwrap(), "--write"]);
    assert_eq!(code(&out), 0);
    let fixed = fs::read_to_string(&file).unwrap();
    parse_query(&fixed, None, Dialect::Strict).unwrap();
    let out = exec(&["fix", file.to_str().unwrap(), "--write"]);
    assert!(stdout(&out).contains("0 queries rewritten"), "{}", stdout(&out));
    assert_eq!(fs::read_to_string(&file).unwrap(), fixed);
}

#[test]
fn fix_hint_namespace_override() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("h.rq");
    fs::copy(fixtures().join("fix/hints_blazegraph.rq"), &file).unwrap();
    let out = exec(&["fix", file.to_str().unwrap(), "--hints-ns", "http://other.example/"]);
    assert!(stdout(&out).contains("0 queries would change"), "{}", stdout(&out));
    let out = exec(&["fix", file.to_str().unwrap()]);
    assert!(stdout(&out).contains("1 query would change"));
}

#[test]
fn fix_write_on_a_corpus_keeps_the_turtle_loadable() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir_all(dir.path().join("P")).unwrap();
    let query = fs::read_to_string(fixtures().join("fix/named_subquery.rq")).unwrap();
    let path = dir.path().join("P/1.ttl");
    fs::write(&path, example_ttl("http://e.org/sparql", query.trim_end(), "")).unwrap();
    let out = exec(&["fix", dir.path().to_str().unwrap(), "--write"]);
    assert_eq!(code(&out), 0, "{}{}", stdout(&out), stderr(&out));
    let ex = load_example_file(&path, &PrefixMap::new()).unwrap();
    assert!(!ex.query_text.contains("INCLUDE"));
    parse_query(&ex.query_text, None, Dialect::Strict).unwrap();
    assert_eq!(code(&exec(&["validate", dir.path().to_str().unwrap()])), 0);
}

#[test]
fn literal_replacement_handles_the_usual_spellings() {
    let long = "x sh:select \"\"\"SELECT * WHERE { ?s ?p \"o\" }\"\"\" .";
    let replaced = replace_query_literal(long, "SELECT * WHERE { ?s ?p \"o\" }", "ASK { }").unwrap();
    assert_eq!(replaced, "x sh:select \"\"\"ASK { }\"\"\" .");
    let short = "x sh:select \"SELECT *\\nWHERE { ?s ?p ?o }\" .";
    let replaced = replace_query_literal(short, "SELECT *\nWHERE { ?s ?p ?o }", "SELECT *\nWHERE { }").unwrap();
    assert_eq!(replaced, "x sh:select \"SELECT *\\nWHERE { }\" .");
    assert!(replace_query_literal("nothing here", "SELECT", "ASK").is_none());
    let twice = "\"\"\"Q\"\"\" \"\"\"Q\"\"\"";
    assert!(replace_query_literal(twice, "Q", "R").is_none());
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap()
}

#[test]
fn test_queries_against_a_mock() {
    let rt = runtime();
    let mock = rt.block_on(MockEndpoint::start(MockConfig::healthy())).unwrap();
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir_all(dir.path().join("P")).unwrap();
    fs::write(dir.path().join("P/1.ttl"), example_ttl(&mock.url(), "SELECT ?s WHERE { ?s ?p ?o }", "")).unwrap();
    let out = exec(&["test-queries", dir.path().to_str().unwrap(), "--endpoint", &mock.url()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).starts_with("PASS\thttp://e.org/1"));
    let sent = &mock.requests()[0].query;
    assert_eq!(parse_query(sent, None, Dialect::Strict).unwrap().modifiers.limit, Some(1));

    mock.set_config(MockConfig::dead());
    let out = exec(&["test-queries", dir.path().to_str().unwrap(), "--remote"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).starts_with("ERROR"));
}

#[test]
fn test_federation_against_mocks() {
    let rt = runtime();
    let alive = rt.block_on(MockEndpoint::start(MockConfig::healthy())).unwrap();
    let dead = rt.block_on(MockEndpoint::start(MockConfig::dead())).unwrap();
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir_all(dir.path().join("P")).unwrap();
    let write = |members: &[&str]| {
        let services: String = members.iter().map(|m| format!("SERVICE <{m}> {{ ?s ?q ?r }} ")).collect();
        let query = format!("SELECT ?s WHERE {{ ?s ?p ?o . {services}}}");
        fs::write(dir.path().join("P/1.ttl"), example_ttl("http://e.org/sparql", &query, "")).unwrap();
    };
    write(&[&alive.url()]);
    let out = exec(&["test-federation", dir.path().to_str().unwrap(), "--remote"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).starts_with("ALIVE"));
    write(&[&alive.url(), &dead.url()]);
    let out = exec(&["test-federation", dir.path().to_str().unwrap(), "--remote"]);
    assert_eq!(code(&out), 1);
    assert_eq!(stdout(&out).lines().count(), 2);
}

#[test]
fn check_personalities() {
    let rt = runtime();
    let mock = rt.block_on(MockEndpoint::start(MockConfig::healthy())).unwrap();
    let graph = graph_iri(&mock.url(), GraphIriRule::StripSparqlPath).unwrap();

    mock.set_config(MockConfig::full_metadata(&graph, 3));
    let out = exec(&["check", "--endpoint", &mock.url()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));

    mock.set_config(MockConfig::missing_void(&graph, 3));
    let out = exec(&["check", "--endpoint", &mock.url(), "--json"]);
    assert_eq!(code(&out), 1);
    let value: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(schema_valid("check-report.schema.json", &value));

    mock.set_config(MockConfig::dead());
    let out = exec(&["check", "--endpoint", &mock.url()]);
    assert_eq!(code(&out), 1);
    assert_eq!(stdout(&out).matches("remedy:").count(), 4);
}

#[test]
fn serve_answers_http() {
    let mut child = bin()
        .args(["serve", "--root", &fx("corpus"), "--bind", "127.0.0.1:0"])
        .env("SPARQL_EXEMPLAR_PROXY_ALLOW", "127.0.0.1,localhost:9")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on http://").unwrap().to_string();

    let mut stream = TcpStream::connect(&addr).unwrap();
    write!(stream, "GET /api/search?q=species HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();

    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    let body = &response[response.find("\r\n\r\n").unwrap() + 4..];
    let value: Value = serde_json::from_str(body).unwrap();
    assert_eq!(value.as_array().unwrap().len(), 3);
}

#[test]
fn serve_with_a_missing_root_fails() {
    let out = exec(&["serve", "--root", "/no/such/dir", "--bind", "127.0.0.1:0"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn in_process_run_matches_the_binary() {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = sparql_exemplar_cli::run(["sparql-exemplar", "validate", &fx("invalid/r7")], &mut out, &mut err);
    assert_eq!(code, 1);
    assert!(String::from_utf8(out).unwrap().contains("R7"));
}
