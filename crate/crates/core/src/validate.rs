//! Metadata and query checks R1-R8.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use crate::rdf::{is_absolute_iri, vocab, PrefixMap};
use crate::sparql::{parse_query, serialize_query, service_endpoints, used_prefixes, Dialect, QueryKind};
use crate::store::{Corpus, LoadError, QueryExample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Rule {
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    R7,
    R8,
}

impl Rule {
    pub fn describe(self) -> &'static str {
        match self {
            Rule::R1 => "example id is a well-formed IRI",
            Rule::R2 => "query parses as SPARQL 1.1 and survives serialize/re-parse",
            Rule::R3 => "at least one language-tagged question",
            Rule::R4 => "at least one http(s) target endpoint",
            Rule::R5 => "query type matches declared type and query form",
            Rule::R6 => "federated declaration matches SERVICE usage",
            Rule::R7 => "every used prefix is declared or resolvable",
            Rule::R8 => "example id unique in the corpus",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Finding {
    pub rule: Rule,
    pub severity: Severity,
    pub example_id: String,
    pub message: String,
    pub file: Option<PathBuf>,
    pub line: Option<usize>,
}

impl Finding {
    fn new(rule: Rule, severity: Severity, example: &QueryExample, message: impl Into<String>) -> Self {
        Finding {
            rule,
            severity,
            example_id: example.id.clone(),
            message: message.into(),
            file: Some(example.source_path.clone()),
            line: None,
        }
    }

    fn sort_key(&self) -> (Option<&PathBuf>, Rule, &str, &str) {
        (self.file.as_ref(), self.rule, &self.example_id, &self.message)
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.severity, self.rule, self.example_id)?;
        if let Some(file) = &self.file {
            write!(f, " ({}", file.display())?;
            if let Some(line) = self.line {
                write!(f, ":{line}")?;
            }
            f.write_str(")")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub errors: usize,
    pub warnings: usize,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn from_findings(mut findings: Vec<Finding>) -> Self {
        findings.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        findings.dedup();
        let errors = findings.iter().filter(|f| f.severity == Severity::Error).count();
        ValidationReport {
            passed: errors == 0,
            errors,
            warnings: findings.len() - errors,
            findings,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for finding in &self.findings {
            out.push_str(&finding.to_string());
            out.push('\n');
        }
        out.push_str(&format!(
            "{}: {} error(s), {} warning(s)\n",
            if self.passed { "PASSED" } else { "FAILED" },
            self.errors,
            self.warnings
        ));
        out
    }
}

#[derive(Debug, Clone)]
pub struct ValidateOptions {
    /// Warn about SERVICE clauses in examples not declared federated.
    pub warn_undeclared_federation: bool,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions {
            warn_undeclared_federation: true,
        }
    }
}

/// Checks one example. `other_ids` are the ids of the remaining corpus
/// examples; `registry` holds the bindings the query may use without
/// declaring them (besides `ex.prefix_decls`).
pub fn validate_example(
    ex: &QueryExample,
    other_ids: &BTreeSet<String>,
    registry: &PrefixMap,
    opts: &ValidateOptions,
) -> Vec<Finding> {
    let mut findings = Vec::new();
    let error = |rule, message: String| Finding::new(rule, Severity::Error, ex, message);

    if ex.is_blank() {
        findings.push(error(Rule::R1, "example is a blank node; it needs an IRI".into()));
    } else if !is_absolute_iri(&ex.id) || url::Url::parse(&ex.id).is_err() {
        findings.push(error(Rule::R1, format!("id '{}' is not an absolute IRI", ex.id)));
    }

    let mut fallback = ex.prefix_decls.clone();
    fallback.merge_missing(registry);

    match parse_query(&ex.query_text, Some(&fallback), Dialect::Strict) {
        Ok(first) => match serialize_query(&first) {
            Ok(text) => match parse_query(&text, None, Dialect::Strict) {
                Ok(second) if second == first => {}
                Ok(_) => findings.push(error(Rule::R2, "re-parsed query differs from the original".into())),
                Err(e) => findings.push(error(Rule::R2, format!("serialized query does not re-parse: {e}"))),
            },
            Err(e) => findings.push(error(Rule::R2, e.to_string())),
        },
        Err(e) if e.is_undeclared_prefix() => {}
        Err(e) => {
            let mut finding = error(Rule::R2, e.to_string());
            finding.line = e.line();
            findings.push(finding);
        }
    }

    if ex.questions.is_empty() {
        findings.push(error(Rule::R3, "no rdfs:comment question".into()));
    } else if !ex.questions.iter().any(|q| q.lang.as_deref().is_some_and(|l| !l.is_empty())) {
        findings.push(error(Rule::R3, "no question carries a language tag".into()));
    }

    if ex.targets.is_empty() {
        findings.push(error(Rule::R4, "no schema:target endpoint".into()));
    }
    for target in &ex.targets {
        let ok = url::Url::parse(target).is_ok_and(|u| matches!(u.scheme(), "http" | "https") && u.has_host());
        if !ok {
            findings.push(error(Rule::R4, format!("target '{target}' is not an http(s) IRI")));
        }
    }

    for declared in &ex.declared_types {
        let kind = match declared.as_str() {
            vocab::SH_SELECT_EXECUTABLE => QueryKind::Select,
            vocab::SH_ASK_EXECUTABLE => QueryKind::Ask,
            vocab::SH_CONSTRUCT_EXECUTABLE => QueryKind::Construct,
            vocab::SPEX_DESCRIBE_EXECUTABLE => QueryKind::Describe,
            _ => continue,
        };
        if kind != ex.query_type {
            findings.push(error(
                Rule::R5,
                format!("declared type {declared} but query stored as {}", ex.query_type),
            ));
        }
    }
    let extended = parse_query(&ex.query_text, Some(&fallback), Dialect::Extended);
    if let Ok(query) = &extended {
        if query.kind() != ex.query_type {
            findings.push(error(
                Rule::R5,
                format!("query is a {} but stored as {}", query.kind(), ex.query_type),
            ));
        }
        let federated = !service_endpoints(query).is_empty();
        if ex.declared_federated && !federated {
            findings.push(error(Rule::R6, "declared federated but the query has no SERVICE clause".into()));
        } else if federated && !ex.declared_federated && opts.warn_undeclared_federation {
            findings.push(Finding::new(
                Rule::R6,
                Severity::Warning,
                ex,
                "query uses SERVICE but is not declared federated",
            ));
        }
    }

    if let Ok((declared, used)) = used_prefixes(&ex.query_text) {
        for label in used.difference(&declared) {
            if !fallback.contains(label) {
                findings.push(error(Rule::R7, format!("prefix '{label}:' is used but never declared")));
            }
        }
    }

    if other_ids.contains(&ex.id) {
        findings.push(error(Rule::R8, format!("id '{}' is used by another example", ex.id)));
    }
    findings
}

fn load_error_rule(error: &LoadError) -> Rule {
    match error {
        LoadError::Io(_) | LoadError::Turtle(_) | LoadError::NoExecutable | LoadError::MultipleExecutables(_) => {
            Rule::R1
        }
        LoadError::QueryNotLiteral => Rule::R2,
        LoadError::MissingQuery | LoadError::MultipleQueries(_) | LoadError::QueryTypeMismatch { .. } => Rule::R5,
        LoadError::MalformedTarget(_) => Rule::R4,
    }
}

/// Per-example findings, load errors and duplicate ids of a corpus.
pub fn validate_corpus(corpus: &Corpus, opts: &ValidateOptions) -> ValidationReport {
    let none = BTreeSet::new();
    let mut findings: Vec<Finding> = corpus
        .examples
        .par_iter()
        .flat_map_iter(|ex| validate_example(ex, &none, &corpus.fallback_prefixes(ex), opts))
        .collect();

    for issue in &corpus.load_errors {
        findings.push(Finding {
            rule: load_error_rule(&issue.error),
            severity: Severity::Error,
            example_id: issue.path.display().to_string(),
            message: issue.error.to_string(),
            file: Some(issue.path.clone()),
            line: issue.error.line(),
        });
    }

    for duplicate in &corpus.duplicates {
        let files: Vec<String> = duplicate.files.iter().map(|f| f.display().to_string()).collect();
        findings.push(Finding {
            rule: Rule::R8,
            severity: Severity::Error,
            example_id: duplicate.id.clone(),
            message: format!("id shared by {} files: {}", files.len(), files.join(", ")),
            file: duplicate.files.first().cloned(),
            line: None,
        });
    }
    ValidationReport::from_findings(findings)
}
