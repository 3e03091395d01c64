//! `sparql-exemplar` subcommands. [`run`] returns the process exit code:
//! 0 success, 1 failed check or operation, 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use similar::TextDiff;
use sparql_exemplar::client::{
    test_examples, test_federation_members, CheckOptions, ClientOptions, RunOptions, SparqlClient, TestStatus,
};
use sparql_exemplar::fix::{default_hint_namespaces, fix_all};
use sparql_exemplar::publish::{compile_target, emit_json, emit_site, CompileOptions, GraphIriRule};
use sparql_exemplar::rdf::PrefixMap;
use sparql_exemplar::service::{self, ServiceConfig};
use sparql_exemplar::store::{load_corpus, load_example_file, load_prefix_file, search, stats, Corpus, SearchField};
use sparql_exemplar::validate::{validate_corpus, ValidateOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "sparql-exemplar", version, about = "Maintain collections of SPARQL query examples")]
pub struct Cli {
    /// Request timeout in seconds for network subcommands.
    #[arg(long, global = true, env = "SPARQL_EXEMPLAR_TIMEOUT", default_value_t = 30)]
    pub timeout: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check every example against the rules; exit 0 iff no errors.
    Validate {
        root: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Apply automatic fixes. Prints diffs unless --write.
    Fix {
        /// Corpus directory, example .ttl or bare .rq file.
        path: PathBuf,
        #[arg(long)]
        write: bool,
        /// Query-hint namespaces to strip (replaces the defaults).
        #[arg(long = "hints-ns", num_args = 1..)]
        hints_ns: Vec<String>,
    },
    /// Markdown pages with Mermaid diagrams.
    Viz {
        root: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turtle bundle of the examples for one endpoint.
    Compile {
        root: PathBuf,
        #[arg(long)]
        endpoint: String,
        #[arg(long)]
        renumber: bool,
        #[arg(long)]
        out: PathBuf,
        /// Wrap the triples in the named graph.
        #[arg(long)]
        trig: bool,
        /// Keep a trailing /sparql in the graph IRI.
        #[arg(long)]
        keep_path: bool,
    },
    /// JSON array for editors.
    ExportJson {
        root: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every example with LIMIT 1 against its targets.
    TestQueries {
        root: PathBuf,
        /// Only this endpoint.
        #[arg(long)]
        endpoint: Option<String>,
        /// Every target endpoint; required when --endpoint is absent.
        #[arg(long)]
        remote: bool,
        #[arg(long, default_value_t = 4)]
        concurrency: usize,
        /// Pause after each request to a host, in milliseconds.
        #[arg(long, default_value_t = 0)]
        delay: u64,
    },
    /// Probe every SERVICE endpoint used by the corpus.
    TestFederation {
        root: PathBuf,
        /// Required; confirms network access.
        #[arg(long)]
        remote: bool,
        #[arg(long, default_value_t = 4)]
        concurrency: usize,
    },
    /// Does an endpoint host an examples graph and VoID?
    Check {
        #[arg(long)]
        endpoint: String,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        keep_path: bool,
    },
    /// Case-sensitive substring search.
    Search {
        root: PathBuf,
        #[arg(long)]
        q: String,
        /// Comma-separated: question, query, keywords.
        #[arg(long, value_delimiter = ',', default_value = "question")]
        fields: Vec<SearchField>,
        #[arg(long)]
        json: bool,
    },
    /// Examples, federated queries and mean triple patterns per project.
    Stats {
        root: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// HTTP API and editor page.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, env = "SPARQL_EXEMPLAR_ROOT")]
    pub root: PathBuf,
    #[arg(long, env = "SPARQL_EXEMPLAR_BIND", default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    /// Proxy allow-list, comma-separated `host` or `host:port`.
    #[arg(long = "allow-host", env = "SPARQL_EXEMPLAR_PROXY_ALLOW", value_delimiter = ',')]
    pub allow_host: Vec<String>,
    /// Serve files from here instead of the built-in page.
    #[arg(long = "static", env = "SPARQL_EXEMPLAR_STATIC")]
    pub static_dir: Option<PathBuf>,
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<i32, Failure>;

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let name = command_name(&cli.command);
    match dispatch(cli, out, err) {
        Ok(code) => code,
        Err(Failure(message)) => {
            let _ = writeln!(err, "{}", json!({ "command": name, "error": message }));
            EXIT_FAILURE
        }
    }
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Validate { .. } => "validate",
        Command::Fix { .. } => "fix",
        Command::Viz { .. } => "viz",
        Command::Compile { .. } => "compile",
        Command::ExportJson { .. } => "export-json",
        Command::TestQueries { .. } => "test-queries",
        Command::TestFederation { .. } => "test-federation",
        Command::Check { .. } => "check",
        Command::Search { .. } => "search",
        Command::Stats { .. } => "stats",
        Command::Serve(_) => "serve",
    }
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn client(timeout: u64) -> SparqlClient {
    SparqlClient::new(ClientOptions {
        timeout: Duration::from_secs(timeout.max(1)),
        ..ClientOptions::default()
    })
}

fn graph_rule(keep_path: bool) -> GraphIriRule {
    if keep_path {
        GraphIriRule::KeepPath
    } else {
        GraphIriRule::StripSparqlPath
    }
}

fn usage(err: &mut dyn Write, message: &str) -> Outcome {
    writeln!(err, "error: {message}")?;
    Ok(EXIT_USAGE)
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    match cli.command {
        Command::Validate { root, json } => {
            let corpus = load_corpus(&root)?;
            let report = validate_corpus(&corpus, &ValidateOptions::default());
            if json {
                writeln!(out, "{}", report.to_json())?;
            } else {
                write!(out, "{}", report.to_text())?;
            }
            Ok(if report.passed { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Fix { path, write, hints_ns } => {
            let hints = if hints_ns.is_empty() { default_hint_namespaces() } else { hints_ns };
            fix(&path, write, &hints, out, err)
        }
        Command::Viz { root, out: dir } => {
            let manifest = emit_site(&load_corpus(&root)?, &dir)?;
            writeln!(
                out,
                "wrote {} page(s), {} project index(es) and {}",
                manifest.pages.len(),
                manifest.project_indexes.len(),
                manifest.root_index.display()
            )?;
            Ok(EXIT_OK)
        }
        Command::Compile {
            root,
            endpoint,
            renumber,
            out: file,
            trig,
            keep_path,
        } => {
            let options = CompileOptions {
                graph_rule: graph_rule(keep_path),
                trig,
            };
            let bundle = compile_target(&load_corpus(&root)?, &endpoint, renumber, &options)?;
            fs::write(&file, &bundle.text)?;
            for warning in &bundle.warnings {
                writeln!(err, "warning: {warning}")?;
            }
            writeln!(
                out,
                "wrote {} example(s) for graph <{}> to {}",
                bundle.example_count,
                bundle.graph_iri,
                file.display()
            )?;
            Ok(EXIT_OK)
        }
        Command::ExportJson { root, out: file } => {
            fs::write(&file, emit_json(&load_corpus(&root)?))?;
            Ok(EXIT_OK)
        }
        Command::TestQueries {
            root,
            endpoint,
            remote,
            concurrency,
            delay,
        } => {
            if endpoint.is_none() && !remote {
                return usage(err, "test-queries contacts endpoints; pass --endpoint IRI or --remote");
            }
            let corpus = load_corpus(&root)?;
            let options = RunOptions {
                max_concurrency: concurrency,
                delay: Duration::from_millis(delay),
                ..RunOptions::default()
            };
            let client = client(cli.timeout);
            let results =
                runtime()?.block_on(test_examples(&client, &corpus, endpoint.as_deref(), &options));
            let mut failed = 0;
            for r in &results {
                let label = match r.status {
                    TestStatus::Pass => "PASS",
                    TestStatus::Empty => "EMPTY",
                    TestStatus::Error => "ERROR",
                    TestStatus::Timeout => "TIMEOUT",
                    TestStatus::Skipped => "SKIP",
                };
                if matches!(r.status, TestStatus::Error | TestStatus::Timeout) {
                    failed += 1;
                }
                writeln!(out, "{label}\t{}\t{}\t{}ms\t{}", r.example_id, r.endpoint, r.latency.as_millis(), r.detail)?;
            }
            writeln!(out, "{} request(s), {failed} failure(s)", results.len())?;
            Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::TestFederation {
            root,
            remote,
            concurrency,
        } => {
            if !remote {
                return usage(err, "test-federation contacts endpoints; pass --remote");
            }
            let corpus = load_corpus(&root)?;
            let options = RunOptions {
                max_concurrency: concurrency,
                ..RunOptions::default()
            };
            let probes = runtime()?.block_on(test_federation_members(&client(cli.timeout), &corpus, &options));
            let dead = probes.iter().filter(|p| !p.alive).count();
            for p in &probes {
                let label = if p.alive { "ALIVE" } else { "DEAD" };
                writeln!(out, "{label}\t{}\t{}", p.endpoint, p.detail)?;
            }
            Ok(if dead == 0 { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Check {
            endpoint,
            json,
            keep_path,
        } => {
            let options = CheckOptions {
                graph_rule: graph_rule(keep_path),
                ..CheckOptions::default()
            };
            let report = runtime()?.block_on(client(cli.timeout).check_endpoint(&endpoint, &options));
            if json {
                writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
            } else {
                write!(out, "{}", report.to_text())?;
            }
            Ok(if report.passed() { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Search { root, q, fields, json } => {
            let corpus = load_corpus(&root)?;
            let hits = search(&corpus, &q, &fields);
            if json {
                let exported = sparql_exemplar::publish::export_examples(hits);
                writeln!(out, "{}", serde_json::to_string_pretty(&exported)?)?;
            } else {
                for ex in hits {
                    let question = ex.preferred_question().map_or("", |q| q.text.as_str());
                    writeln!(out, "{}\t{question}", ex.id)?;
                }
            }
            Ok(EXIT_OK)
        }
        Command::Stats { root, json } => {
            let s = stats(&load_corpus(&root)?);
            if json {
                writeln!(out, "{}", serde_json::to_string_pretty(&s)?)?;
            } else {
                write!(out, "{}", stats_table(&s))?;
            }
            Ok(EXIT_OK)
        }
        Command::Serve(args) => serve(args, cli.timeout, out),
    }
}

fn stats_table(s: &sparql_exemplar::store::CorpusStats) -> String {
    let width = s.projects.keys().map(String::len).max().unwrap_or(0).max(7);
    let mut text = format!("{:<width$}  examples  federated  mean TPs  unparsable\n", "project");
    let rows = s.projects.iter().map(|(k, v)| (k.as_str(), v)).chain([("total", &s.total)]);
    for (name, p) in rows {
        text.push_str(&format!(
            "{name:<width$}  {:>8}  {:>9}  {:>8.1}  {:>10}\n",
            p.example_count, p.federated_count, p.mean_triple_patterns, p.unparsable
        ));
    }
    text
}

fn serve(args: ServeArgs, timeout: u64, out: &mut dyn Write) -> Outcome {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .try_init();
    let mut config = ServiceConfig::new(args.root, args.bind);
    config.static_dir = args.static_dir;
    if !args.allow_host.is_empty() {
        config.allowed_proxy_hosts = Some(args.allow_host);
    }
    config.client.timeout = Duration::from_secs(timeout.max(1));
    let rt = runtime()?;
    rt.block_on(async {
        let (addr, task) = service::spawn(config).await?;
        writeln!(out, "listening on http://{addr}")?;
        out.flush()?;
        task.await??;
        Ok(EXIT_OK)
    })
}

/// Prefixes a lone file may rely on: `prefixes.ttl` beside it or one level up.
fn nearby_prefixes(file: &Path) -> PrefixMap {
    let mut map = PrefixMap::new();
    for dir in file.ancestors().skip(1).take(2) {
        let candidate = dir.join("prefixes.ttl");
        if let Ok(found) = load_prefix_file(&candidate) {
            map.merge_missing(&found);
        }
    }
    map
}

fn fix(path: &Path, write: bool, hints: &[String], out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    // (file, original query text, registry)
    let mut jobs: Vec<(PathBuf, String, PrefixMap)> = Vec::new();
    if path.is_dir() {
        let corpus: Corpus = load_corpus(path)?;
        for issue in &corpus.load_errors {
            writeln!(err, "skipped {}: {}", issue.path.display(), issue.error)?;
        }
        for ex in &corpus.examples {
            jobs.push((ex.source_path.clone(), ex.query_text.clone(), corpus.fallback_prefixes(ex)));
        }
    } else if path.extension().is_some_and(|x| x == "ttl") {
        let prefixes = nearby_prefixes(path);
        let ex = load_example_file(path, &prefixes)?;
        let mut registry = ex.prefix_decls.clone();
        registry.merge_missing(&prefixes);
        jobs.push((path.to_path_buf(), ex.query_text, registry));
    } else {
        jobs.push((path.to_path_buf(), fs::read_to_string(path)?, nearby_prefixes(path)));
    }

    let mut changed = 0;
    let mut failed = 0;
    for (file, original, registry) in jobs {
        let (fixed, report) = match fix_all(&original, &registry, hints) {
            Ok(pair) => pair,
            Err(e) => {
                failed += 1;
                writeln!(err, "{}: {e}", file.display())?;
                continue;
            }
        };
        for warning in &report.warnings {
            writeln!(err, "{}: warning: {warning}", file.display())?;
        }
        if !report.changed() {
            continue;
        }
        changed += 1;
        let name = file.display().to_string();
        if !write {
            let diff = TextDiff::from_lines(&original, &fixed);
            write!(out, "{}", diff.unified_diff().header(&name, &format!("{name} (fixed)")))?;
            continue;
        }
        let is_turtle = file.extension().is_some_and(|x| x == "ttl");
        let new_text = if is_turtle {
            let text = fs::read_to_string(&file)?;
            match replace_query_literal(&text, &original, &fixed) {
                Some(t) => t,
                None => {
                    failed += 1;
                    writeln!(err, "{name}: query literal not found verbatim; fix by hand")?;
                    continue;
                }
            }
        } else {
            fixed
        };
        fs::write(&file, new_text)?;
        writeln!(out, "fixed {name}")?;
    }
    writeln!(
        out,
        "{changed} quer{} {}",
        if changed == 1 { "y" } else { "ies" },
        if write { "rewritten" } else { "would change" }
    )?;
    Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILURE })
}

fn escape_long(text: &str) -> String {
    text.replace('\\', "\\\\").replace("\"\"\"", "\\\"\\\"\\\"")
}

fn escape_short(text: &str) -> String {
    text.replace('\\', "\\\\")
        .replace('"', "\\\"")
        .replace('\n', "\\n")
        .replace('\r', "\\r")
        .replace('\t', "\\t")
}

/// Swaps the query literal inside a Turtle file, keeping everything else.
/// Returns `None` unless the old text occurs exactly once in one of the
/// usual spellings.
pub fn replace_query_literal(turtle: &str, old: &str, new: &str) -> Option<String> {
    type Escape = fn(&str) -> String;
    let forms: [(Escape, &str); 4] = [
        (|s| s.to_string(), "\"\"\""),
        (escape_long, "\"\"\""),
        (|s| s.to_string(), "'''"),
        (escape_short, "\""),
    ];
    for (escape, quote) in forms {
        let needle = format!("{quote}{}{quote}", escape(old));
        if turtle.matches(&needle).count() == 1 {
            let replacement = if quote == "\"" {
                format!("\"{}\"", escape_short(new))
            } else {
                format!("\"\"\"{}\"\"\"", escape_long(new))
            };
            return Some(turtle.replacen(&needle, &replacement, 1));
        }
    }
    None
}
