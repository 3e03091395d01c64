//! Python module `sparql_exemplar`. Structured results come back as plain
//! dicts and lists.

use std::path::Path;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use sparql_exemplar::fix::{default_hint_namespaces, fix_all};
use sparql_exemplar::publish::{compile_target, emit_json, export_examples, graph_iri, CompileOptions, GraphIriRule};
use sparql_exemplar::rdf::PrefixMap;
use sparql_exemplar::sparql::{count_triple_patterns, parse_query, serialize_query, Dialect};
use sparql_exemplar::store::{load_corpus, search, stats, Corpus, SearchField};
use sparql_exemplar::validate::{validate_corpus, ValidateOptions};
use sparql_exemplar::viz::{build_query_graph, emit_mermaid};

fn corpus(root: &str) -> PyResult<Corpus> {
    load_corpus(Path::new(root)).map_err(|e| PyIOError::new_err(e.to_string()))
}

fn to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Validation report for a corpus directory.
#[pyfunction]
fn validate<'py>(py: Python<'py>, root: &str) -> PyResult<Bound<'py, PyAny>> {
    let report = validate_corpus(&corpus(root)?, &ValidateOptions::default());
    to_py(py, &report)
}

/// Examples whose fields contain `needle` (case-sensitive).
#[pyfunction]
#[pyo3(signature = (root, needle, fields = vec!["question".to_string()]))]
fn search_examples<'py>(py: Python<'py>, root: &str, needle: &str, fields: Vec<String>) -> PyResult<Bound<'py, PyAny>> {
    let fields: Vec<SearchField> = fields
        .iter()
        .map(|f| f.parse())
        .collect::<Result<_, String>>()
        .map_err(PyValueError::new_err)?;
    let corpus = corpus(root)?;
    to_py(py, &export_examples(search(&corpus, needle, &fields)))
}

#[pyfunction]
fn corpus_stats<'py>(py: Python<'py>, root: &str) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &stats(&corpus(root)?))
}

/// JSON text of the exported examples.
#[pyfunction]
fn export_json(root: &str) -> PyResult<String> {
    Ok(emit_json(&corpus(root)?))
}

/// Returns `(fixed_text, report)`.
#[pyfunction]
#[pyo3(signature = (text, prefixes = None, hint_namespaces = None))]
fn fix<'py>(
    py: Python<'py>,
    text: &str,
    prefixes: Option<Bound<'py, PyDict>>,
    hint_namespaces: Option<Vec<String>>,
) -> PyResult<(String, Bound<'py, PyAny>)> {
    let mut registry = PrefixMap::new();
    if let Some(dict) = prefixes {
        for (k, v) in dict.iter() {
            registry.insert(k.extract::<String>()?, v.extract::<String>()?);
        }
    }
    let hints = hint_namespaces.unwrap_or_else(default_hint_namespaces);
    let (fixed, report) = fix_all(text, &registry, &hints).map_err(value_error)?;
    Ok((fixed, to_py(py, &report)?))
}

/// Canonical text of a query (parse, then serialize).
#[pyfunction]
fn normalize(text: &str) -> PyResult<String> {
    let query = parse_query(text, None, Dialect::Extended).map_err(value_error)?;
    serialize_query(&query).map_err(value_error)
}

#[pyfunction]
fn triple_pattern_count(text: &str) -> PyResult<usize> {
    Ok(count_triple_patterns(&parse_query(text, None, Dialect::Extended).map_err(value_error)?))
}

#[pyfunction]
fn mermaid(text: &str) -> PyResult<String> {
    let query = parse_query(text, None, Dialect::Extended).map_err(value_error)?;
    Ok(emit_mermaid(&build_query_graph(&query)))
}

#[pyfunction]
#[pyo3(signature = (endpoint, keep_path = false))]
fn examples_graph_iri(endpoint: &str, keep_path: bool) -> PyResult<String> {
    let rule = if keep_path { GraphIriRule::KeepPath } else { GraphIriRule::StripSparqlPath };
    graph_iri(endpoint, rule).map_err(value_error)
}

/// Turtle bundle for one endpoint.
#[pyfunction]
#[pyo3(signature = (root, endpoint, renumber = true))]
fn compile(root: &str, endpoint: &str, renumber: bool) -> PyResult<String> {
    let bundle = compile_target(&corpus(root)?, endpoint, renumber, &CompileOptions::default()).map_err(value_error)?;
    Ok(bundle.text)
}

#[pymodule]
#[pyo3(name = "sparql_exemplar")]
fn init_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(search_examples, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_stats, m)?)?;
    m.add_function(wrap_pyfunction!(export_json, m)?)?;
    m.add_function(wrap_pyfunction!(fix, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(triple_pattern_count, m)?)?;
    m.add_function(wrap_pyfunction!(mermaid, m)?)?;
    m.add_function(wrap_pyfunction!(examples_graph_iri, m)?)?;
    m.add_function(wrap_pyfunction!(compile, m)?)?;
    Ok(())
}
