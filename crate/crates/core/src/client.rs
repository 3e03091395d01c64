//! SPARQL 1.1 protocol client and the network checks built on it.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::Value;
use tokio::sync::{Mutex, Semaphore};

use crate::fix::rewrite_named_subqueries;
use crate::publish::{graph_iri, GraphIriRule};
use crate::rdf::{parse_turtle, vocab, Literal, PrefixMap, Term, Triple};
use crate::sparql::{parse_query, serialize_query, service_endpoints, with_limit, Dialect, QueryKind, VarOrTerm};
use crate::store::{Corpus, QueryExample};

pub const DEFAULT_ACCEPT: &str = "application/sparql-results+json,text/turtle;q=0.9,application/json;q=0.8";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
/// Queries whose urlencoded form is longer than this go by POST in auto mode.
pub const GET_URL_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Auto,
    Get,
    Post,
}

#[derive(Debug, Clone)]
pub struct ClientOptions {
    pub timeout: Duration,
    pub method: Method,
    pub accept: Option<String>,
    /// Extra attempts after a transport failure. HTTP errors are never retried.
    pub retries: u32,
}

impl Default for ClientOptions {
    fn default() -> Self {
        ClientOptions {
            timeout: DEFAULT_TIMEOUT,
            method: Method::Auto,
            accept: None,
            retries: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ResultKind {
    Bindings {
        variables: Vec<String>,
        rows: Vec<BTreeMap<String, Term>>,
    },
    Boolean {
        value: bool,
    },
    Graph {
        triples: Vec<Triple>,
    },
}

impl ResultKind {
    /// Rows, triples, or 1 for a boolean answer.
    pub fn result_count(&self) -> usize {
        match self {
            ResultKind::Bindings { rows, .. } => rows.len(),
            ResultKind::Boolean { .. } => 1,
            ResultKind::Graph { triples } => triples.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparqlResponse {
    pub kind: ResultKind,
    pub http_status: u16,
    pub content_type: String,
    pub latency: Duration,
    /// Diagnostics such as a mislabelled content type.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClientError {
    #[error("endpoint '{0}' is not an http(s) IRI")]
    BadEndpoint(String),
    #[error("timed out after {0:?}")]
    Timeout(Duration),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}: {excerpt}")]
    Http {
        status: u16,
        content_type: String,
        excerpt: String,
    },
    #[error("unparsable {content_type} body: {message}")]
    Body { content_type: String, message: String },
}

impl ClientError {
    pub fn status(&self) -> Option<u16> {
        match self {
            ClientError::Http { status, .. } => Some(*status),
            _ => None,
        }
    }
}

fn excerpt(text: &str) -> String {
    const MAX: usize = 200;
    let trimmed = text.trim();
    match trimmed.char_indices().nth(MAX) {
        Some((cut, _)) => format!("{}...", &trimmed[..cut]),
        None => trimmed.to_string(),
    }
}

/// Checks that `endpoint` is an absolute http(s) URL with a host.
pub fn parse_endpoint(endpoint: &str) -> Result<url::Url, ClientError> {
    url::Url::parse(endpoint)
        .ok()
        .filter(|u| matches!(u.scheme(), "http" | "https") && u.has_host())
        .ok_or_else(|| ClientError::BadEndpoint(endpoint.to_string()))
}

/// `host:port` key used to serialize requests per host.
pub fn host_key(endpoint: &str) -> String {
    match url::Url::parse(endpoint) {
        Ok(u) => format!(
            "{}:{}",
            u.host_str().unwrap_or_default(),
            u.port_or_known_default().unwrap_or_default()
        ),
        Err(_) => endpoint.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BodyFormat {
    Json,
    Turtle,
}

fn declared_format(media_type: &str) -> Option<BodyFormat> {
    match media_type {
        "application/sparql-results+json" | "application/json" => Some(BodyFormat::Json),
        "text/turtle" | "application/x-turtle" | "application/n-triples" | "application/trig" => {
            Some(BodyFormat::Turtle)
        }
        _ => None,
    }
}

fn sniff(body: &str) -> Option<BodyFormat> {
    match body.trim_start().chars().next()? {
        '{' | '[' => Some(BodyFormat::Json),
        '@' | '<' | '_' | '#' => Some(BodyFormat::Turtle),
        c if c.is_ascii_alphabetic() => Some(BodyFormat::Turtle),
        _ => None,
    }
}

/// Parses a response body as SPARQL JSON results or Turtle. The declared
/// content type is trusted unless the first non-space byte contradicts
/// it; the returned notes mention any mislabel.
pub fn parse_response_body(content_type: &str, body: &str) -> Result<(ResultKind, Vec<String>), ClientError> {
    let media_type = content_type.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
    let declared = declared_format(&media_type);
    let sniffed = sniff(body);
    let mut notes = Vec::new();
    let format = match (declared, sniffed) {
        (Some(d), Some(s)) if d != s && s == BodyFormat::Json => {
            notes.push(format!("body looks like JSON but was labelled '{content_type}'"));
            s
        }
        (Some(d), _) => d,
        (None, Some(s)) => {
            notes.push(format!(
                "content type '{content_type}' is not a SPARQL result type; parsed as {}",
                if s == BodyFormat::Json { "JSON" } else { "Turtle" }
            ));
            s
        }
        (None, None) => {
            return Err(ClientError::Body {
                content_type: content_type.to_string(),
                message: if body.trim().is_empty() {
                    "empty body".into()
                } else {
                    "unrecognised body".into()
                },
            })
        }
    };
    let body_error = |message: String| ClientError::Body {
        content_type: content_type.to_string(),
        message,
    };
    let kind = match format {
        BodyFormat::Json => {
            let value: Value = serde_json::from_str(body).map_err(|e| body_error(e.to_string()))?;
            parse_results_json(&value).map_err(body_error)?
        }
        BodyFormat::Turtle => {
            let (triples, _) = parse_turtle(body, None).map_err(|e| body_error(e.to_string()))?;
            ResultKind::Graph { triples }
        }
    };
    Ok((kind, notes))
}

/// Reads the W3C SPARQL 1.1 JSON results format.
pub fn parse_results_json(value: &Value) -> Result<ResultKind, String> {
    if let Some(b) = value.get("boolean") {
        return b
            .as_bool()
            .map(|value| ResultKind::Boolean { value })
            .ok_or_else(|| "\"boolean\" is not true or false".to_string());
    }
    let variables: Vec<String> = value
        .pointer("/head/vars")
        .and_then(Value::as_array)
        .ok_or("missing head.vars")?
        .iter()
        .map(|v| v.as_str().map(str::to_string).ok_or("non-string variable name"))
        .collect::<Result<_, _>>()?;
    let bindings = value
        .pointer("/results/bindings")
        .and_then(Value::as_array)
        .ok_or("missing results.bindings")?;
    let mut rows = Vec::with_capacity(bindings.len());
    for binding in bindings {
        let object = binding.as_object().ok_or("binding is not an object")?;
        let mut row = BTreeMap::new();
        for (name, term) in object {
            row.insert(name.clone(), json_term(term)?);
        }
        rows.push(row);
    }
    Ok(ResultKind::Bindings { variables, rows })
}

fn json_term(term: &Value) -> Result<Term, String> {
    let kind = term.get("type").and_then(Value::as_str).ok_or("term without type")?;
    let value = term.get("value").and_then(Value::as_str).ok_or("term without value")?;
    Ok(match kind {
        "uri" => Term::iri(value),
        "bnode" => Term::BlankNode(value.to_string()),
        "literal" | "typed-literal" => {
            if let Some(lang) = term.get("xml:lang").and_then(Value::as_str) {
                Term::Literal(Literal::lang(value, lang))
            } else if let Some(datatype) = term.get("datatype").and_then(Value::as_str) {
                Term::Literal(Literal::typed(value, datatype))
            } else {
                Term::Literal(Literal::simple(value))
            }
        }
        other => return Err(format!("unknown term type '{other}'")),
    })
}

/// Cheap to clone; clones share the connection pool.
#[derive(Debug, Clone)]
pub struct SparqlClient {
    http: reqwest::Client,
    options: ClientOptions,
}

impl Default for SparqlClient {
    fn default() -> Self {
        SparqlClient::new(ClientOptions::default())
    }
}

impl SparqlClient {
    pub fn new(options: ClientOptions) -> Self {
        let http = reqwest::Client::builder()
            .timeout(options.timeout)
            .user_agent(concat!("sparql-exemplar/", env!("CARGO_PKG_VERSION")))
            .build()
            .expect("HTTP client builds");
        SparqlClient { http, options }
    }

    pub fn options(&self) -> &ClientOptions {
        &self.options
    }

    pub fn http(&self) -> &reqwest::Client {
        &self.http
    }

    fn request(&self, url: &url::Url, query: &str) -> reqwest::RequestBuilder {
        let accept = self.options.accept.as_deref().unwrap_or(DEFAULT_ACCEPT);
        let use_get = match self.options.method {
            Method::Get => true,
            Method::Post => false,
            Method::Auto => {
                let encoded: String = url::form_urlencoded::byte_serialize(query.as_bytes()).collect();
                url.as_str().len() + encoded.len() + 7 <= GET_URL_LIMIT
            }
        };
        let builder = if use_get {
            self.http.get(url.clone()).query(&[("query", query)])
        } else {
            self.http.post(url.clone()).form(&[("query", query)])
        };
        builder.header(reqwest::header::ACCEPT, accept)
    }

    /// Sends `query` and parses the answer.
    pub async fn execute(&self, endpoint: &str, query: &str) -> Result<SparqlResponse, ClientError> {
        let url = parse_endpoint(endpoint)?;
        let started = Instant::now();
        let mut attempt = 0;
        let response = loop {
            match self.request(&url, query).send().await {
                Ok(response) => break response,
                Err(e) if e.is_timeout() => return Err(ClientError::Timeout(self.options.timeout)),
                Err(e) if attempt < self.options.retries => {
                    tracing::debug!(endpoint, error = %e, "retrying after transport error");
                    attempt += 1;
                }
                Err(e) => return Err(ClientError::Transport(error_chain(&e))),
            }
        };
        let status = response.status().as_u16();
        let content_type = response
            .headers()
            .get(reqwest::header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .unwrap_or("")
            .to_string();
        let body = response.text().await.map_err(|e| {
            if e.is_timeout() {
                ClientError::Timeout(self.options.timeout)
            } else {
                ClientError::Transport(error_chain(&e))
            }
        })?;
        if status >= 400 {
            return Err(ClientError::Http {
                status,
                content_type,
                excerpt: excerpt(&body),
            });
        }
        let (kind, notes) = parse_response_body(&content_type, &body)?;
        Ok(SparqlResponse {
            kind,
            http_status: status,
            content_type,
            latency: started.elapsed(),
            notes,
        })
    }

    /// Runs one example against `target`. Non-ASK queries are sent with a
    /// top-level `LIMIT 1`; ASK queries go out as written.
    pub async fn test_example(&self, ex: &QueryExample, target: &str, prefixes: &PrefixMap) -> EndpointTestResult {
        let started = Instant::now();
        let result = |status, detail: String| EndpointTestResult {
            example_id: ex.id.clone(),
            endpoint: target.to_string(),
            status,
            detail,
            latency: started.elapsed(),
        };
        let text = match limited_query_text(ex, prefixes) {
            Ok(text) => text,
            Err(reason) => return result(TestStatus::Skipped, reason),
        };
        match self.execute(target, &text).await {
            Ok(response) => {
                let count = response.kind.result_count();
                let mut detail = match &response.kind {
                    ResultKind::Boolean { value } => format!("boolean {value}"),
                    ResultKind::Bindings { .. } => format!("{count} row(s)"),
                    ResultKind::Graph { .. } => format!("{count} triple(s)"),
                };
                for note in &response.notes {
                    detail.push_str("; ");
                    detail.push_str(note);
                }
                let status = if count > 0 { TestStatus::Pass } else { TestStatus::Empty };
                EndpointTestResult {
                    latency: response.latency,
                    ..result(status, detail)
                }
            }
            Err(ClientError::Timeout(d)) => result(TestStatus::Timeout, format!("no answer within {d:?}")),
            Err(e) => result(TestStatus::Error, e.to_string()),
        }
    }

    /// Liveness check: `ASK WHERE { }`, then a one-row SELECT if the ASK
    /// is refused.
    pub async fn probe_endpoint(&self, endpoint: &str) -> ProbeResult {
        let started = Instant::now();
        let probe = |alive, detail| ProbeResult {
            endpoint: endpoint.to_string(),
            alive,
            detail,
            latency: started.elapsed(),
        };
        let ask_error = match self.execute(endpoint, PROBE_ASK).await {
            Ok(_) => return probe(true, "ASK answered".into()),
            Err(e @ ClientError::BadEndpoint(_)) => return probe(false, e.to_string()),
            Err(e) => e,
        };
        match self.execute(endpoint, PROBE_SELECT).await {
            Ok(_) => probe(true, format!("ASK failed ({ask_error}); SELECT fallback answered")),
            Err(e) => probe(false, format!("ASK failed ({ask_error}); SELECT failed ({e})")),
        }
    }

    pub async fn summarize_void(&self, endpoint: &str, queries: &VoidQueries) -> Result<VoidSummary, ClientError> {
        let classes = self.execute(endpoint, &queries.classes).await?;
        let links = self.execute(endpoint, &queries.links).await?;
        let mut summary = VoidSummary::default();
        for row in rows(&classes.kind) {
            if let Some(class_iri) = iri_of(row, "class") {
                summary.classes.push(ClassPartition {
                    class_iri,
                    entity_count: count_of(row, "count"),
                });
            }
        }
        for row in rows(&links.kind) {
            if let (Some(source_class), Some(property), Some(target)) =
                (iri_of(row, "source"), iri_of(row, "property"), iri_of(row, "target"))
            {
                summary.links.push(ClassLink {
                    source_class,
                    property,
                    target,
                    triple_count: count_of(row, "count"),
                });
            }
        }
        summary.classes.sort_by(|a, b| a.class_iri.cmp(&b.class_iri));
        summary.classes.dedup();
        summary.links.sort_by(|a, b| {
            (&a.source_class, &a.property, &a.target).cmp(&(&b.source_class, &b.property, &b.target))
        });
        summary.links.dedup();
        if summary.is_empty() {
            summary
                .notes
                .push(format!("{endpoint} publishes no VoID class or property partitions"));
        }
        Ok(summary)
    }

    /// Checks that an endpoint hosts an examples graph and a VoID
    /// description.
    pub async fn check_endpoint(&self, endpoint: &str, options: &CheckOptions) -> CheckReport {
        let mut criteria = Vec::new();
        let probe = self.probe_endpoint(endpoint).await;
        let graph = graph_iri(endpoint, options.graph_rule).ok();
        criteria.push(Criterion::new(
            CRITERION_ALIVE,
            probe.alive,
            probe.detail.clone(),
            format!(
                "The endpoint did not answer ASK or SELECT probes. Check the URL and that the server speaks \
                 the SPARQL 1.1 protocol ({})",
                probe.detail
            ),
        ));
        let dead = |name: &str| Criterion::new(name, false, "not checked".into(), SKIPPED_REMEDY.into());
        let (Some(graph), true) = (graph, probe.alive) else {
            criteria.extend([CRITERION_GRAPH, CRITERION_COUNT, CRITERION_VOID].map(dead));
            return CheckReport {
                endpoint: endpoint.to_string(),
                criteria,
            };
        };

        let load_remedy = format!(
            "Compile the examples with `sparql-exemplar compile --endpoint {endpoint} --renumber` and load the \
             result into the named graph <{graph}>"
        );
        let present = self.execute(endpoint, &graph_present_query(&graph)).await;
        let (graph_ok, graph_detail) = match &present {
            Ok(SparqlResponse {
                kind: ResultKind::Boolean { value },
                ..
            }) => (*value, format!("ASK on <{graph}> returned {value}")),
            Ok(other) => (false, format!("unexpected answer kind {:?}", other.kind)),
            Err(e) => (false, e.to_string()),
        };
        criteria.push(Criterion::new(CRITERION_GRAPH, graph_ok, graph_detail, load_remedy.clone()));

        let (count_ok, count_detail) = match self.execute(endpoint, &example_count_query(&graph)).await {
            Ok(response) => {
                let n = rows(&response.kind).first().map_or(0, |row| count_of(row, "count"));
                (n > 0, format!("{n} sh:SPARQLExecutable subject(s) in <{graph}>"))
            }
            Err(e) => (false, e.to_string()),
        };
        criteria.push(Criterion::new(
            CRITERION_COUNT,
            count_ok,
            count_detail,
            format!(
                "No subject typed sh:SPARQLExecutable (or a subtype) was found in <{graph}>. {load_remedy}; make \
                 sure every example keeps its rdf:type triples"
            ),
        ));

        let (void_ok, void_detail) = match self.summarize_void(endpoint, &options.void_queries).await {
            Ok(summary) if !summary.is_empty() => (
                true,
                format!("{} class(es), {} link(s)", summary.classes.len(), summary.links.len()),
            ),
            Ok(summary) => (false, summary.notes.join("; ")),
            Err(e) => (false, e.to_string()),
        };
        criteria.push(Criterion::new(
            CRITERION_VOID,
            void_ok,
            void_detail,
            "Generate a VoID description with void:classPartition and void:propertyPartition statistics \
             (a VoID generator run against the endpoint does this) and load it into the endpoint"
                .into(),
        ));
        CheckReport {
            endpoint: endpoint.to_string(),
            criteria,
        }
    }
}

fn error_chain(error: &dyn std::error::Error) -> String {
    let mut text = error.to_string();
    let mut source = error.source();
    while let Some(inner) = source {
        text.push_str(": ");
        text.push_str(&inner.to_string());
        source = inner.source();
    }
    text
}

/// Query text sent by [`SparqlClient::test_example`].
pub fn limited_query_text(ex: &QueryExample, prefixes: &PrefixMap) -> Result<String, String> {
    if ex.query_type == QueryKind::Ask {
        return Ok(ex.query_text.clone());
    }
    let mut query = parse_query(&ex.query_text, Some(prefixes), Dialect::Extended)
        .map_err(|e| format!("query does not parse: {e}"))?;
    if !query.named_subqueries.is_empty() {
        let (rewritten, _) = rewrite_named_subqueries(&ex.query_text).map_err(|e| e.to_string())?;
        query = parse_query(&rewritten, Some(prefixes), Dialect::Strict)
            .map_err(|e| format!("rewritten query does not parse: {e}"))?;
    }
    serialize_query(&with_limit(&query, 1)).map_err(|e| e.to_string())
}

fn rows(kind: &ResultKind) -> &[BTreeMap<String, Term>] {
    match kind {
        ResultKind::Bindings { rows, .. } => rows,
        _ => &[],
    }
}

fn iri_of(row: &BTreeMap<String, Term>, name: &str) -> Option<String> {
    row.get(name).and_then(Term::as_iri).map(str::to_string)
}

fn count_of(row: &BTreeMap<String, Term>, name: &str) -> u64 {
    row.get(name)
        .and_then(Term::as_literal)
        .and_then(|l| l.lexical.trim().parse::<u64>().ok())
        .unwrap_or(0)
}

pub const PROBE_ASK: &str = "ASK WHERE { }";
pub const PROBE_SELECT: &str = "SELECT * WHERE { ?s ?p ?o } LIMIT 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TestStatus {
    Pass,
    Empty,
    Error,
    Timeout,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndpointTestResult {
    pub example_id: String,
    pub endpoint: String,
    pub status: TestStatus,
    pub detail: String,
    pub latency: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProbeResult {
    pub endpoint: String,
    pub alive: bool,
    pub detail: String,
    pub latency: Duration,
}

/// Shared stop switch for long runs.
#[derive(Debug, Clone, Default)]
pub struct CancelFlag(Arc<AtomicBool>);

impl CancelFlag {
    pub fn cancel(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub max_concurrency: usize,
    /// At most one request in flight per `host:port`.
    pub per_host_serial: bool,
    /// Pause after each request to the same host.
    pub delay: Duration,
    pub cancel: CancelFlag,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            max_concurrency: 4,
            per_host_serial: true,
            delay: Duration::ZERO,
            cancel: CancelFlag::default(),
        }
    }
}

/// Runs `job` over `items` under the politeness rules of `options`.
/// Items not started before cancellation are dropped; the rest come back
/// in input order.
async fn run_polite<T, R, F, Fut>(items: Vec<(String, T)>, options: &RunOptions, job: F) -> Vec<R>
where
    T: Send + 'static,
    R: Send + 'static,
    F: Fn(T) -> Fut + Send + Sync + 'static,
    Fut: std::future::Future<Output = R> + Send,
{
    let semaphore = Arc::new(Semaphore::new(options.max_concurrency.max(1)));
    let mut hosts: HashMap<String, Arc<Mutex<()>>> = HashMap::new();
    let job = Arc::new(job);
    let mut tasks = tokio::task::JoinSet::new();
    for (index, (host, item)) in items.into_iter().enumerate() {
        let host_lock = options
            .per_host_serial
            .then(|| hosts.entry(host).or_default().clone());
        let semaphore = semaphore.clone();
        let job = job.clone();
        let cancel = options.cancel.clone();
        let delay = options.delay;
        tasks.spawn(async move {
            let _host = match &host_lock {
                Some(lock) => Some(lock.lock().await),
                None => None,
            };
            let _slot = semaphore.acquire_owned().await.ok()?;
            if cancel.is_cancelled() {
                return None;
            }
            let result = job(item).await;
            if !delay.is_zero() {
                tokio::time::sleep(delay).await;
            }
            Some((index, result))
        });
    }
    let mut done = Vec::new();
    while let Some(joined) = tasks.join_next().await {
        if let Ok(Some(pair)) = joined {
            done.push(pair);
        }
    }
    done.sort_by_key(|(index, _)| *index);
    done.into_iter().map(|(_, r)| r).collect()
}

/// Every SERVICE IRI used in the corpus, once, in first-seen order.
pub fn federation_members(corpus: &Corpus) -> Vec<String> {
    let mut seen = Vec::new();
    for ex in &corpus.examples {
        let Ok(query) = corpus.parse(ex) else { continue };
        for endpoint in service_endpoints(&query) {
            if let VarOrTerm::Term(Term::Iri(iri)) = endpoint {
                if !seen.contains(&iri) {
                    seen.push(iri);
                }
            }
        }
    }
    seen
}

/// Probes each federation member once.
pub async fn test_federation_members(client: &SparqlClient, corpus: &Corpus, options: &RunOptions) -> Vec<ProbeResult> {
    let items = federation_members(corpus)
        .into_iter()
        .map(|endpoint| (host_key(&endpoint), endpoint))
        .collect();
    let client = client.clone();
    run_polite(items, options, move |endpoint: String| {
        let client = client.clone();
        async move { client.probe_endpoint(&endpoint).await }
    })
    .await
}

/// Runs every example against each of its targets (only `endpoint` when
/// given).
pub async fn test_examples(
    client: &SparqlClient,
    corpus: &Corpus,
    endpoint: Option<&str>,
    options: &RunOptions,
) -> Vec<EndpointTestResult> {
    let mut items = Vec::new();
    for ex in &corpus.examples {
        let prefixes = corpus.fallback_prefixes(ex);
        for target in &ex.targets {
            if endpoint.is_some_and(|e| !crate::store::same_endpoint(e, target)) {
                continue;
            }
            items.push((host_key(target), (ex.clone(), target.clone(), prefixes.clone())));
        }
    }
    let client = client.clone();
    run_polite(items, options, move |(ex, target, prefixes): (QueryExample, String, PrefixMap)| {
        let client = client.clone();
        async move { client.test_example(&ex, &target, &prefixes).await }
    })
    .await
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassPartition {
    pub class_iri: String,
    pub entity_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassLink {
    pub source_class: String,
    pub property: String,
    /// A class or a datatype IRI.
    pub target: String,
    pub triple_count: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct VoidSummary {
    pub classes: Vec<ClassPartition>,
    pub links: Vec<ClassLink>,
    pub notes: Vec<String>,
}

impl VoidSummary {
    pub fn is_empty(&self) -> bool {
        self.classes.is_empty() && self.links.is_empty()
    }

    /// Properties leaving `class`, most frequent first.
    pub fn properties_of(&self, class: &str) -> Vec<&ClassLink> {
        let mut out: Vec<&ClassLink> = self.links.iter().filter(|l| l.source_class == class).collect();
        out.sort_by(|a, b| b.triple_count.cmp(&a.triple_count).then_with(|| a.property.cmp(&b.property)));
        out
    }
}

/// The two VoID queries. The class query binds `?class` and `?count`; the
/// link query binds `?source`, `?property`, `?target` and `?count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoidQueries {
    pub classes: String,
    pub links: String,
}

pub const VOID_EXT: &str = "http://ldf.fi/void-ext#";

impl Default for VoidQueries {
    fn default() -> Self {
        VoidQueries {
            classes: "PREFIX void: <http://rdfs.org/ns/void#>\n\
                      SELECT DISTINCT ?class ?count WHERE {\n  \
                      ?partition void:class ?class ;\n    void:entities ?count .\n}"
                .to_string(),
            links: format!(
                "PREFIX void: <http://rdfs.org/ns/void#>\n\
                 PREFIX void_ext: <{VOID_EXT}>\n\
                 SELECT DISTINCT ?source ?property ?target ?count WHERE {{\n  \
                 ?classPartition void:class ?source ;\n    void:propertyPartition ?propertyPartition .\n  \
                 ?propertyPartition void:property ?property ;\n    void:triples ?count .\n  \
                 {{ ?propertyPartition void:classPartition ?targetPartition .\n    \
                 ?targetPartition void:class ?target . }}\n  \
                 UNION\n  \
                 {{ ?propertyPartition void_ext:datatypePartition ?datatypePartition .\n    \
                 ?datatypePartition void_ext:datatype ?target . }}\n}}"
            ),
        }
    }
}

pub const CRITERION_GRAPH: &str = "examples_graph_present";
pub const CRITERION_COUNT: &str = "examples_count>0";
pub const CRITERION_VOID: &str = "void_present";
pub const CRITERION_ALIVE: &str = "service_alive";
const SKIPPED_REMEDY: &str = "Not checked because the endpoint is not alive; fix service_alive first";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Criterion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// Empty when passed.
    pub remedy: String,
}

impl Criterion {
    fn new(name: &str, passed: bool, detail: String, remedy: String) -> Self {
        Criterion {
            name: name.to_string(),
            passed,
            detail,
            remedy: if passed { String::new() } else { remedy },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckReport {
    pub endpoint: String,
    pub criteria: Vec<Criterion>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn criterion(&self, name: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.endpoint);
        for c in &self.criteria {
            out.push_str(&format!("  [{}] {}: {}\n", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail));
            if !c.passed {
                out.push_str(&format!("      remedy: {}\n", c.remedy));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
pub struct CheckOptions {
    pub graph_rule: GraphIriRule,
    pub void_queries: VoidQueries,
}

pub fn graph_present_query(graph: &str) -> String {
    format!("ASK WHERE {{ GRAPH <{graph}> {{ ?s ?p ?o }} }}")
}

pub fn example_count_query(graph: &str) -> String {
    format!(
        "PREFIX sh: <{sh}>\nPREFIX spex: <{spex}>\nSELECT (COUNT(DISTINCT ?example) AS ?count) WHERE {{\n  \
         GRAPH <{graph}> {{\n    ?example a ?type .\n    \
         VALUES ?type {{ sh:SPARQLExecutable sh:SPARQLSelectExecutable sh:SPARQLAskExecutable \
         sh:SPARQLConstructExecutable spex:SPARQLDescribeExecutable }}\n  }}\n}}",
        sh = vocab::SH,
        spex = vocab::SPEX
    )
}
