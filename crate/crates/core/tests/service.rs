mod common;

use std::collections::BTreeSet;
use std::fs;
use std::net::SocketAddr;
use std::path::Path;
use std::time::Duration;

use common::fixtures;
use serde_json::Value;
use sparql_exemplar::mock::{MockConfig, MockEndpoint};
use sparql_exemplar::publish::{graph_iri, GraphIriRule};
use sparql_exemplar::service::{spawn, AllowList, ServiceConfig};
use sparql_exemplar::store::{load_corpus, search, SearchField};

async fn start(config: impl FnOnce(&mut ServiceConfig)) -> String {
    let mut cfg = ServiceConfig::new(fixtures().join("corpus"), "127.0.0.1:0".parse::<SocketAddr>().unwrap());
    config(&mut cfg);
    let (addr, _task) = spawn(cfg).await.unwrap();
    format!("http://{addr}")
}

fn http() -> reqwest::Client {
    reqwest::Client::new()
}

async fn get_json(url: &str) -> (u16, Value) {
    let response = http().get(url).send().await.unwrap();
    let status = response.status().as_u16();
    (status, serde_json::from_str(&response.text().await.unwrap()).unwrap())
}

fn schema(name: &str) -> jsonschema::Validator {
    let text = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name)).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn ids(value: &Value) -> BTreeSet<String> {
    value
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["id"].as_str().unwrap().to_string())
        .collect()
}

#[tokio::test]
async fn examples_route() {
    let base = start(|_| {}).await;
    let (status, all) = get_json(&format!("{base}/api/examples")).await;
    assert_eq!(status, 200);
    assert_eq!(all.as_array().unwrap().len(), 21);
    assert!(schema("examples.schema.json").is_valid(&all));

    let (_, uniprot) = get_json(&format!("{base}/api/examples?target=https://sparql.uniprot.org/sparql/")).await;
    assert_eq!(uniprot.as_array().unwrap().len(), 7);

    let (status, none) = get_json(&format!("{base}/api/examples?target=https://unknown.example/sparql")).await;
    assert_eq!(status, 200);
    assert_eq!(none, Value::Array(vec![]));
}

#[tokio::test]
async fn search_route_matches_the_library() {
    let base = start(|_| {}).await;
    let corpus = load_corpus(&fixtures().join("corpus")).unwrap();
    for (needle, fields, list) in [
        ("species", "question", vec![SearchField::Question]),
        ("SERVICE", "query", vec![SearchField::Query]),
        ("taxa", "keywords,question", vec![SearchField::Keywords, SearchField::Question]),
    ] {
        let (status, body) = get_json(&format!("{base}/api/search?q={needle}&fields={fields}")).await;
        assert_eq!(status, 200);
        let expected: BTreeSet<String> = search(&corpus, needle, &list).into_iter().map(|e| e.id.clone()).collect();
        assert_eq!(ids(&body), expected, "{needle}");
        assert!(!expected.is_empty());
    }
    let (_, default_field) = get_json(&format!("{base}/api/search?q=species")).await;
    assert_eq!(ids(&default_field).len(), 3);
}

#[tokio::test]
async fn bad_parameters_are_400() {
    let base = start(|_| {}).await;
    for path in [
        "/api/search",
        "/api/search?q=x&fields=bogus",
        "/api/autocomplete",
        "/api/autocomplete?endpoint=ftp://x/sparql",
        "/api/check",
        "/api/check?endpoint=nonsense",
    ] {
        let (status, body) = get_json(&format!("{base}{path}")).await;
        assert_eq!(status, 400, "{path}");
        assert!(body["error"].is_string(), "{path}");
    }
    let response = http().post(format!("{base}/api/proxy")).body("ASK {}").send().await.unwrap();
    assert_eq!(response.status().as_u16(), 400);
}

#[tokio::test]
async fn proxy_refuses_hosts_off_the_allow_list() {
    let mock = MockEndpoint::start(MockConfig::healthy()).await.unwrap();
    let base = start(|_| {}).await;
    let response = http()
        .post(format!("{base}/api/proxy?endpoint={}", mock.url()))
        .body("ASK {}")
        .send()
        .await
        .unwrap();
    assert_eq!(response.status().as_u16(), 403);
    assert!(mock.requests().is_empty());
}

#[tokio::test]
async fn proxy_passes_bytes_through() {
    let mock = MockEndpoint::start(MockConfig::healthy()).await.unwrap();
    let base = start(|c| c.allowed_proxy_hosts = Some(vec!["127.0.0.1".into()])).await;
    let query = "SELECT ?s WHERE { ?s ?p ?o }";
    let direct = http().post(mock.url()).form(&[("query", query)]).send().await.unwrap();
    let direct_type = direct.headers()["content-type"].clone();
    let direct_bytes = direct.bytes().await.unwrap();

    for request in [
        http().post(format!("{base}/api/proxy?endpoint={}", mock.url())).form(&[("query", query)]),
        http()
            .post(format!("{base}/api/proxy?endpoint={}", mock.url()))
            .header("content-type", "application/sparql-query")
            .body(query),
    ] {
        let response = request.send().await.unwrap();
        assert_eq!(response.status().as_u16(), 200);
        assert_eq!(response.headers()["content-type"], direct_type);
        assert_eq!(response.bytes().await.unwrap(), direct_bytes);
    }
    let seen: Vec<String> = mock.requests().into_iter().map(|r| r.query).collect();
    assert_eq!(seen, [query, query, query]);
}

#[tokio::test]
async fn proxy_reports_upstream_errors_as_502() {
    let mock = MockEndpoint::start(MockConfig::fixed(500, "text/plain", "boom")).await.unwrap();
    let base = start(|c| c.allowed_proxy_hosts = Some(vec![format!("127.0.0.1:{}", mock.addr.port())])).await;
    let response = http()
        .post(format!("{base}/api/proxy?endpoint={}", mock.url()))
        .body("ASK {}")
        .send()
        .await
        .unwrap();
    assert_eq!(response.status().as_u16(), 502);
    let body: Value = serde_json::from_str(&response.text().await.unwrap()).unwrap();
    assert_eq!(body["upstreamStatus"], 500);
    assert!(body["error"].as_str().unwrap().contains("boom"));
}

#[test]
fn allow_list_matching() {
    let list = AllowList::new(["sparql.uniprot.org", "localhost:8890"]);
    let ok = |s: &str| list.allows(&url::Url::parse(s).unwrap());
    assert!(ok("https://sparql.uniprot.org/sparql"));
    assert!(ok("http://SPARQL.UNIPROT.ORG:8080/sparql"));
    assert!(ok("http://localhost:8890/sparql"));
    assert!(!ok("http://localhost:8891/sparql"));
    assert!(!ok("https://evil.example/sparql"));

    let corpus = load_corpus(&fixtures().join("corpus")).unwrap();
    let from_corpus = AllowList::from_corpus(&corpus);
    assert!(from_corpus.allows(&url::Url::parse("https://sparql.rhea-db.org/sparql").unwrap()));
}

#[tokio::test]
async fn autocomplete_is_cached() {
    let mock = MockEndpoint::start(MockConfig::full_metadata("http://x/g", 1)).await.unwrap();
    let base = start(|_| {}).await;
    let url = format!("{base}/api/autocomplete?endpoint={}", mock.url());
    let (status, first) = get_json(&url).await;
    assert_eq!(status, 200);
    assert!(schema("void-summary.schema.json").is_valid(&first), "{first}");
    assert_eq!(first["classes"].as_array().unwrap().len(), 2);
    let upstream = mock.requests().len();
    assert_eq!(upstream, 2);
    let (_, second) = get_json(&url).await;
    assert_eq!(first, second);
    assert_eq!(mock.requests().len(), upstream);
}

#[tokio::test]
async fn autocomplete_cache_expires() {
    let mock = MockEndpoint::start(MockConfig::full_metadata("http://x/g", 1)).await.unwrap();
    let base = start(|c| c.autocomplete_ttl = Duration::from_millis(50)).await;
    let url = format!("{base}/api/autocomplete?endpoint={}", mock.url());
    get_json(&url).await;
    tokio::time::sleep(Duration::from_millis(100)).await;
    get_json(&url).await;
    assert_eq!(mock.requests().len(), 4);
}

#[tokio::test]
async fn check_route_is_schema_valid() {
    let mock = MockEndpoint::start(MockConfig::healthy()).await.unwrap();
    let graph = graph_iri(&mock.url(), GraphIriRule::StripSparqlPath).unwrap();
    mock.set_config(MockConfig::missing_void(&graph, 2));
    let base = start(|_| {}).await;
    let (status, report) = get_json(&format!("{base}/api/check?endpoint={}", mock.url())).await;
    assert_eq!(status, 200);
    assert!(schema("check-report.schema.json").is_valid(&report), "{report}");
    let failed: Vec<&str> = report["criteria"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["void_present"]);
}

#[tokio::test]
async fn cors_header_is_present() {
    let base = start(|_| {}).await;
    let response = http()
        .get(format!("{base}/api/examples"))
        .header("origin", "http://editor.example")
        .send()
        .await
        .unwrap();
    assert_eq!(response.headers()["access-control-allow-origin"], "*");
}

#[tokio::test]
async fn index_page_and_static_dir() {
    let base = start(|_| {}).await;
    let response = http().get(format!("{base}/")).send().await.unwrap();
    assert_eq!(response.status().as_u16(), 200);
    assert!(response.headers()["content-type"].to_str().unwrap().starts_with("text/html"));
    assert!(response.text().await.unwrap().contains("api/examples"));

    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("index.html"), "<p>custom editor</p>").unwrap();
    fs::write(dir.path().join("app.js"), "console.log(1)").unwrap();
    let path = dir.path().to_path_buf();
    let base = start(move |c| c.static_dir = Some(path)).await;
    assert_eq!(http().get(format!("{base}/")).send().await.unwrap().text().await.unwrap(), "<p>custom editor</p>");
    assert_eq!(
        http().get(format!("{base}/app.js")).send().await.unwrap().text().await.unwrap(),
        "console.log(1)"
    );
    let (status, _) = get_json(&format!("{base}/api/examples")).await;
    assert_eq!(status, 200);
}

#[tokio::test]
async fn missing_corpus_fails_to_start() {
    let cfg = ServiceConfig::new("/no/such/dir", "127.0.0.1:0".parse::<SocketAddr>().unwrap());
    assert!(spawn(cfg).await.is_err());
}
