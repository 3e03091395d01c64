//! HTTP API over a loaded corpus, used by the query editor.
//!
//! | route | answer |
//! |---|---|
//! | `GET /api/examples?target=IRI` | exported examples, all when `target` is absent |
//! | `GET /api/search?q=STR&fields=question,query,keywords` | exported examples |
//! | `GET /api/autocomplete?endpoint=IRI` | VoID summary, cached |
//! | `GET /api/check?endpoint=IRI` | check report |
//! | `POST /api/proxy?endpoint=IRI` | upstream body and content type as received |
//! | `GET /` | editor page or files from the static directory |

use std::collections::{BTreeSet, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use crate::client::{parse_endpoint, CheckOptions, ClientOptions, SparqlClient, VoidQueries, VoidSummary};
use crate::publish::export_examples;
use crate::store::{load_corpus, search, Corpus, LoadError, SearchField};

pub const INDEX_HTML: &str = include_str!("../assets/index.html");

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub corpus_root: PathBuf,
    pub bind_address: SocketAddr,
    /// Hosts (`host` or `host:port`) the proxy may reach. `None` allows the
    /// hosts of the corpus target endpoints.
    pub allowed_proxy_hosts: Option<Vec<String>>,
    pub static_dir: Option<PathBuf>,
    pub autocomplete_ttl: Duration,
    pub autocomplete_capacity: usize,
    pub client: ClientOptions,
}

impl ServiceConfig {
    pub fn new(corpus_root: impl Into<PathBuf>, bind_address: SocketAddr) -> Self {
        ServiceConfig {
            corpus_root: corpus_root.into(),
            bind_address,
            allowed_proxy_hosts: None,
            static_dir: None,
            autocomplete_ttl: Duration::from_secs(3600),
            autocomplete_capacity: 256,
            client: ClientOptions::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("corpus failed to load: {0}")]
    Corpus(#[from] LoadError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// `host[:port]` entries; a bare host allows every port.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AllowList(BTreeSet<String>);

impl AllowList {
    pub fn new(entries: impl IntoIterator<Item = impl Into<String>>) -> Self {
        AllowList(entries.into_iter().map(|e| e.into().to_ascii_lowercase()).collect())
    }

    /// Hosts of every target endpoint in the corpus.
    pub fn from_corpus(corpus: &Corpus) -> Self {
        AllowList::new(
            corpus
                .examples
                .iter()
                .flat_map(|e| &e.targets)
                .filter_map(|t| url::Url::parse(t).ok()?.host_str().map(str::to_string)),
        )
    }

    pub fn allows(&self, endpoint: &url::Url) -> bool {
        let Some(host) = endpoint.host_str().map(str::to_ascii_lowercase) else {
            return false;
        };
        let port = endpoint.port_or_known_default().unwrap_or_default();
        self.0.contains(&host) || self.0.contains(&format!("{host}:{port}"))
    }
}

struct Cache {
    entries: HashMap<String, (Instant, VoidSummary)>,
    ttl: Duration,
    capacity: usize,
}

impl Cache {
    fn get(&mut self, key: &str) -> Option<VoidSummary> {
        let (stored, summary) = self.entries.get(key)?;
        if stored.elapsed() < self.ttl {
            return Some(summary.clone());
        }
        self.entries.remove(key);
        None
    }

    fn put(&mut self, key: String, summary: VoidSummary) {
        if self.entries.len() >= self.capacity && !self.entries.contains_key(&key) {
            let oldest = self.entries.iter().min_by_key(|(_, (t, _))| *t).map(|(k, _)| k.clone());
            if let Some(oldest) = oldest {
                self.entries.remove(&oldest);
            }
        }
        self.entries.insert(key, (Instant::now(), summary));
    }
}

pub struct AppState {
    pub corpus: Corpus,
    pub client: SparqlClient,
    pub allow: AllowList,
    pub check: CheckOptions,
    pub void_queries: VoidQueries,
    cache: Mutex<Cache>,
    /// Upstream fetches made by the autocomplete route.
    pub autocomplete_fetches: std::sync::atomic::AtomicUsize,
}

impl AppState {
    pub fn new(corpus: Corpus, config: &ServiceConfig) -> Self {
        let allow = match &config.allowed_proxy_hosts {
            Some(hosts) => AllowList::new(hosts.clone()),
            None => AllowList::from_corpus(&corpus),
        };
        AppState {
            corpus,
            client: SparqlClient::new(config.client.clone()),
            allow,
            check: CheckOptions::default(),
            void_queries: VoidQueries::default(),
            cache: Mutex::new(Cache {
                entries: HashMap::new(),
                ttl: config.autocomplete_ttl,
                capacity: config.autocomplete_capacity.max(1),
            }),
            autocomplete_fetches: Default::default(),
        }
    }
}

pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/examples", get(examples))
        .route("/api/search", get(search_route))
        .route("/api/autocomplete", get(autocomplete))
        .route("/api/check", get(check))
        .route("/api/proxy", post(proxy))
        .with_state(state);
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(INDEX_HTML) })),
    };
    app.layer(CorsLayer::permissive())
}

/// Loads the corpus and binds; returns the bound address and the server task.
pub async fn spawn(
    config: ServiceConfig,
) -> Result<(SocketAddr, tokio::task::JoinHandle<std::io::Result<()>>), ServiceError> {
    let corpus = load_corpus(&config.corpus_root)?;
    tracing::info!(examples = corpus.examples.len(), root = %config.corpus_root.display(), "corpus loaded");
    let state = Arc::new(AppState::new(corpus, &config));
    let app = router(state, config.static_dir.clone());
    let listener = tokio::net::TcpListener::bind(config.bind_address).await?;
    let addr = listener.local_addr()?;
    tracing::info!(%addr, "listening");
    let task = tokio::spawn(async move { axum::serve(listener, app).await });
    Ok((addr, task))
}

/// Runs until the server stops.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let (_, task) = spawn(config).await?;
    match task.await {
        Ok(result) => Ok(result?),
        Err(e) => Err(std::io::Error::other(e).into()),
    }
}

fn bad_request(message: impl Into<String>) -> Response {
    (StatusCode::BAD_REQUEST, Json(json!({ "error": message.into() }))).into_response()
}

#[derive(Deserialize)]
struct TargetParams {
    target: Option<String>,
}

async fn examples(State(state): State<Arc<AppState>>, Query(params): Query<TargetParams>) -> Response {
    let exported = match &params.target {
        Some(target) => export_examples(state.corpus.for_target(target)),
        None => export_examples(&state.corpus.examples),
    };
    Json(exported).into_response()
}

#[derive(Deserialize)]
struct SearchParams {
    q: Option<String>,
    fields: Option<String>,
}

async fn search_route(State(state): State<Arc<AppState>>, Query(params): Query<SearchParams>) -> Response {
    let Some(needle) = params.q else {
        return bad_request("missing parameter 'q'");
    };
    let fields: Vec<SearchField> = match &params.fields {
        None => vec![SearchField::Question],
        Some(list) => match list.split(',').map(|f| f.trim().parse()).collect::<Result<_, _>>() {
            Ok(fields) => fields,
            Err(e) => return bad_request(e),
        },
    };
    Json(export_examples(search(&state.corpus, &needle, &fields))).into_response()
}

#[derive(Deserialize)]
struct EndpointParams {
    endpoint: Option<String>,
}

fn endpoint_param(params: &EndpointParams) -> Result<url::Url, Box<Response>> {
    let Some(endpoint) = &params.endpoint else {
        return Err(Box::new(bad_request("missing parameter 'endpoint'")));
    };
    parse_endpoint(endpoint).map_err(|e| Box::new(bad_request(e.to_string())))
}

async fn autocomplete(State(state): State<Arc<AppState>>, Query(params): Query<EndpointParams>) -> Response {
    let url = match endpoint_param(&params) {
        Ok(url) => url,
        Err(response) => return *response,
    };
    let key = url.to_string();
    if let Some(hit) = state.cache.lock().unwrap().get(&key) {
        return Json(hit).into_response();
    }
    state
        .autocomplete_fetches
        .fetch_add(1, std::sync::atomic::Ordering::SeqCst);
    match state.client.summarize_void(url.as_str(), &state.void_queries).await {
        Ok(summary) => {
            state.cache.lock().unwrap().put(key, summary.clone());
            Json(summary).into_response()
        }
        Err(e) => upstream_failure(e.status(), e.to_string()),
    }
}

async fn check(State(state): State<Arc<AppState>>, Query(params): Query<EndpointParams>) -> Response {
    let url = match endpoint_param(&params) {
        Ok(url) => url,
        Err(response) => return *response,
    };
    Json(state.client.check_endpoint(url.as_str(), &state.check).await).into_response()
}

fn upstream_failure(status: Option<u16>, message: String) -> Response {
    (
        StatusCode::BAD_GATEWAY,
        Json(json!({ "error": message, "upstreamStatus": status })),
    )
        .into_response()
}

/// Body is either `query=...` form data or a raw `application/sparql-query`.
fn proxied_query(headers: &HeaderMap, body: &Bytes) -> Option<String> {
    let content_type = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("");
    if content_type.starts_with("application/x-www-form-urlencoded") {
        url::form_urlencoded::parse(body)
            .find(|(k, _)| k == "query")
            .map(|(_, v)| v.into_owned())
    } else {
        String::from_utf8(body.to_vec()).ok().filter(|q| !q.trim().is_empty())
    }
}

async fn proxy(
    State(state): State<Arc<AppState>>,
    Query(params): Query<EndpointParams>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    let url = match endpoint_param(&params) {
        Ok(url) => url,
        Err(response) => return *response,
    };
    if !state.allow.allows(&url) {
        return (
            StatusCode::FORBIDDEN,
            Json(json!({ "error": format!("{} is not on the proxy allow-list", url.host_str().unwrap_or("")) })),
        )
            .into_response();
    }
    let Some(query) = proxied_query(&headers, &body) else {
        return bad_request("request body carries no query");
    };
    let accept = headers
        .get(header::ACCEPT)
        .and_then(|v| v.to_str().ok())
        .unwrap_or(crate::client::DEFAULT_ACCEPT)
        .to_string();
    let upstream = state
        .client
        .http()
        .post(url.clone())
        .header(header::ACCEPT, accept)
        .form(&[("query", query.as_str())])
        .send()
        .await;
    let response = match upstream {
        Ok(r) => r,
        Err(e) => return upstream_failure(None, e.to_string()),
    };
    let status = response.status();
    let content_type = response.headers().get(header::CONTENT_TYPE).cloned();
    let bytes = match response.bytes().await {
        Ok(b) => b,
        Err(e) => return upstream_failure(Some(status.as_u16()), e.to_string()),
    };
    if status.is_client_error() || status.is_server_error() {
        return upstream_failure(Some(status.as_u16()), String::from_utf8_lossy(&bytes).into_owned());
    }
    let mut out = (StatusCode::OK, bytes).into_response();
    if let Some(ct) = content_type {
        out.headers_mut().insert(header::CONTENT_TYPE, ct);
    }
    out
}
