//! In-process SPARQL endpoint for tests and demos. It answers by looking
//! at the query text and records every request it sees.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::any;
use axum::Router;
use serde_json::{json, Value};

use crate::sparql::{tokenize, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedResponse {
    pub status: u16,
    pub content_type: String,
    pub body: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MockVoid {
    /// `(class, entity count)`
    pub classes: Vec<(String, u64)>,
    /// `(source class, property, target, triple count)`
    pub links: Vec<(String, String, String, u64)>,
}

#[derive(Debug, Clone)]
pub struct MockConfig {
    /// When false every request gets HTTP 500.
    pub alive: bool,
    /// Reject ASK queries with this status.
    pub ask_status: Option<u16>,
    pub ask_answer: bool,
    /// Rows returned for an ordinary SELECT.
    pub select_rows: usize,
    /// Triples returned for CONSTRUCT and DESCRIBE.
    pub graph_triples: usize,
    pub examples_graph: Option<String>,
    pub example_count: u64,
    pub void: Option<MockVoid>,
    /// Serve JSON results as `text/plain`.
    pub mislabel_json: bool,
    pub latency: Duration,
    /// Answer everything with this response.
    pub fixed: Option<FixedResponse>,
}

impl Default for MockConfig {
    fn default() -> Self {
        MockConfig {
            alive: true,
            ask_status: None,
            ask_answer: true,
            select_rows: 1,
            graph_triples: 1,
            examples_graph: None,
            example_count: 0,
            void: None,
            mislabel_json: false,
            latency: Duration::ZERO,
            fixed: None,
        }
    }
}

pub const EX: &str = "http://example.org/";

impl MockConfig {
    pub fn healthy() -> Self {
        MockConfig::default()
    }

    /// Examples graph with `count` examples plus a two-class VoID.
    pub fn full_metadata(graph: &str, count: u64) -> Self {
        MockConfig {
            examples_graph: Some(graph.to_string()),
            example_count: count,
            void: Some(MockVoid {
                classes: vec![(format!("{EX}ClassA"), 5), (format!("{EX}ClassB"), 3)],
                links: vec![(format!("{EX}ClassA"), format!("{EX}p"), format!("{EX}ClassB"), 10)],
            }),
            ..MockConfig::default()
        }
    }

    pub fn missing_void(graph: &str, count: u64) -> Self {
        MockConfig {
            void: None,
            ..MockConfig::full_metadata(graph, count)
        }
    }

    pub fn dead() -> Self {
        MockConfig {
            alive: false,
            ..MockConfig::default()
        }
    }

    pub fn fixed(status: u16, content_type: &str, body: &str) -> Self {
        MockConfig {
            fixed: Some(FixedResponse {
                status,
                content_type: content_type.to_string(),
                body: body.to_string(),
            }),
            ..MockConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordedRequest {
    pub method: String,
    pub query: String,
    pub accept: Option<String>,
}

#[derive(Debug, Default)]
struct Recorder {
    requests: Mutex<Vec<RecordedRequest>>,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
}

struct Shared {
    config: Mutex<MockConfig>,
    recorder: Recorder,
}

/// A running mock. The server stops when this value is dropped.
pub struct MockEndpoint {
    pub addr: SocketAddr,
    shared: Arc<Shared>,
    task: tokio::task::JoinHandle<()>,
}

impl MockEndpoint {
    /// Binds an ephemeral port on 127.0.0.1.
    pub async fn start(config: MockConfig) -> std::io::Result<Self> {
        let shared = Arc::new(Shared {
            config: Mutex::new(config),
            recorder: Recorder::default(),
        });
        let app = Router::new()
            .route("/sparql", any(handle))
            .route("/sparql/", any(handle))
            .with_state(shared.clone());
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        let task = tokio::spawn(async move {
            let _ = axum::serve(listener, app).await;
        });
        Ok(MockEndpoint { addr, shared, task })
    }

    /// Endpoint URL, `http://127.0.0.1:<port>/sparql`.
    pub fn url(&self) -> String {
        format!("http://{}/sparql", self.addr)
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.shared.recorder.requests.lock().unwrap().clone()
    }

    pub fn max_in_flight(&self) -> usize {
        self.shared.recorder.max_in_flight.load(Ordering::SeqCst)
    }

    pub fn set_config(&self, config: MockConfig) {
        *self.shared.config.lock().unwrap() = config;
    }
}

impl Drop for MockEndpoint {
    fn drop(&mut self) {
        self.task.abort();
    }
}

struct InFlight<'a>(&'a Recorder);

impl<'a> InFlight<'a> {
    fn enter(recorder: &'a Recorder) -> Self {
        let now = recorder.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        recorder.max_in_flight.fetch_max(now, Ordering::SeqCst);
        InFlight(recorder)
    }
}

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.in_flight.fetch_sub(1, Ordering::SeqCst);
    }
}

fn extract_query(method: &Method, params: &[(String, String)], headers: &HeaderMap, body: &Bytes) -> Option<String> {
    if let Some((_, q)) = params.iter().find(|(k, _)| k == "query") {
        return Some(q.clone());
    }
    if *method != Method::POST {
        return None;
    }
    let content_type = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("");
    if content_type.starts_with("application/sparql-query") {
        return String::from_utf8(body.to_vec()).ok();
    }
    url::form_urlencoded::parse(body)
        .find(|(k, _)| k == "query")
        .map(|(_, v)| v.into_owned())
}

async fn handle(
    State(shared): State<Arc<Shared>>,
    method: Method,
    Query(params): Query<Vec<(String, String)>>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    let _guard = InFlight::enter(&shared.recorder);
    let query = extract_query(&method, &params, &headers, &body);
    shared.recorder.requests.lock().unwrap().push(RecordedRequest {
        method: method.to_string(),
        query: query.clone().unwrap_or_default(),
        accept: headers
            .get(header::ACCEPT)
            .and_then(|v| v.to_str().ok())
            .map(str::to_string),
    });
    let config = shared.config.lock().unwrap().clone();
    if !config.latency.is_zero() {
        tokio::time::sleep(config.latency).await;
    }
    if let Some(fixed) = &config.fixed {
        return (
            StatusCode::from_u16(fixed.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR),
            [(header::CONTENT_TYPE, fixed.content_type.clone())],
            fixed.body.clone(),
        )
            .into_response();
    }
    if !config.alive {
        return (StatusCode::INTERNAL_SERVER_ERROR, "endpoint is down").into_response();
    }
    let Some(query) = query else {
        return (StatusCode::BAD_REQUEST, "missing query parameter").into_response();
    };
    answer(&config, &query)
}

fn query_form(query: &str) -> Option<String> {
    tokenize(query).ok()?.into_iter().find_map(|t| {
        let upper = t.lexeme.to_ascii_uppercase();
        (t.kind == TokenKind::Keyword && matches!(upper.as_str(), "SELECT" | "ASK" | "CONSTRUCT" | "DESCRIBE"))
            .then_some(upper)
    })
}

fn json_response(config: &MockConfig, value: Value) -> Response {
    let content_type = if config.mislabel_json {
        "text/plain; charset=utf-8"
    } else {
        "application/sparql-results+json; charset=utf-8"
    };
    ([(header::CONTENT_TYPE, content_type)], value.to_string()).into_response()
}

fn bindings(vars: &[&str], rows: Vec<Value>) -> Value {
    json!({ "head": { "vars": vars }, "results": { "bindings": rows } })
}

fn uri(value: &str) -> Value {
    json!({ "type": "uri", "value": value })
}

fn count(n: u64) -> Value {
    json!({ "type": "literal", "datatype": "http://www.w3.org/2001/XMLSchema#integer", "value": n.to_string() })
}

fn answer(config: &MockConfig, query: &str) -> Response {
    let Some(form) = query_form(query) else {
        return (StatusCode::BAD_REQUEST, "query does not tokenize").into_response();
    };
    let examples_graph = config
        .examples_graph
        .as_ref()
        .is_some_and(|g| query.contains(&format!("<{g}>")));
    let mentions_graph = query.contains(".well-known/sparql-examples");

    if form == "ASK" {
        if let Some(status) = config.ask_status {
            return (
                StatusCode::from_u16(status).unwrap_or(StatusCode::BAD_REQUEST),
                "ASK is not supported here",
            )
                .into_response();
        }
        let value = if mentions_graph { examples_graph } else { config.ask_answer };
        return json_response(config, json!({ "head": {}, "boolean": value }));
    }

    if form == "SELECT" && query.contains("http://rdfs.org/ns/void#") {
        let void = config.void.clone().unwrap_or_default();
        let value = if query.contains("propertyPartition") {
            bindings(
                &["source", "property", "target", "count"],
                void.links
                    .iter()
                    .map(|(s, p, t, n)| json!({ "source": uri(s), "property": uri(p), "target": uri(t), "count": count(*n) }))
                    .collect(),
            )
        } else {
            bindings(
                &["class", "count"],
                void.classes
                    .iter()
                    .map(|(c, n)| json!({ "class": uri(c), "count": count(*n) }))
                    .collect(),
            )
        };
        return json_response(config, value);
    }

    if form == "SELECT" && mentions_graph && query.to_ascii_uppercase().contains("COUNT(") {
        let n = if examples_graph { config.example_count } else { 0 };
        return json_response(config, bindings(&["count"], vec![json!({ "count": count(n) })]));
    }

    match form.as_str() {
        "SELECT" => {
            let rows = (0..config.select_rows)
                .map(|i| json!({ "s": uri(&format!("{EX}resource/{i}")) }))
                .collect();
            json_response(config, bindings(&["s"], rows))
        }
        _ => {
            let body: String = (0..config.graph_triples)
                .map(|i| format!("<{EX}resource/{i}> <{EX}p> \"{i}\" .\n"))
                .collect();
            ([(header::CONTENT_TYPE, "text/turtle")], body).into_response()
        }
    }
}
