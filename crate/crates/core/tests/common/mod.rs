#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sparql_exemplar::rdf::{Term, Triple};
use sparql_exemplar::sparql::{
    GroupElement, GroupPattern, Predicate, Projection, Query, QueryForm, TriplePattern, VarOrTerm,
};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub type Solution = BTreeMap<String, Term>;

/// Tiny evaluator for BGPs of plain links, nested groups, OPTIONAL, UNION,
/// VALUES and sub-selects. Blank nodes in patterns act as variables.
pub fn evaluate(query: &Query, data: &[Triple]) -> Vec<Solution> {
    let group = query.where_clause.as_ref().expect("query has a WHERE clause");
    let solutions = eval_group(group, data);
    let projected = match &query.form {
        QueryForm::Select(select) => match &select.projection {
            Projection::Star => return sorted(solutions.into_iter().map(strip_blank_vars).collect()),
            Projection::Items(items) => items.iter().map(|i| i.variable().to_string()).collect::<Vec<_>>(),
        },
        _ => panic!("only SELECT is supported"),
    };
    let rows = solutions
        .into_iter()
        .map(|s| {
            s.into_iter()
                .filter(|(k, _)| projected.contains(k))
                .collect::<Solution>()
        })
        .collect();
    sorted(rows)
}

fn strip_blank_vars(s: Solution) -> Solution {
    s.into_iter().filter(|(k, _)| !k.starts_with("_:")).collect()
}

pub fn sorted(mut rows: Vec<Solution>) -> Vec<Solution> {
    rows.sort();
    rows
}

fn eval_group(group: &GroupPattern, data: &[Triple]) -> Vec<Solution> {
    let mut current = vec![Solution::new()];
    for element in &group.elements {
        current = match element {
            GroupElement::Bgp(triples) => triples.iter().fold(current, |acc, t| join_pattern(acc, t, data)),
            GroupElement::Group(inner) => join(&current, &eval_group(inner, data)),
            GroupElement::Optional(inner) => left_join(&current, &eval_group(inner, data)),
            GroupElement::Union(branches) => {
                let all: Vec<Solution> = branches.iter().flat_map(|b| eval_group(b, data)).collect();
                join(&current, &all)
            }
            GroupElement::SubSelect(query) => join(&current, &evaluate(query, data)),
            GroupElement::Values(values) => {
                let rows: Vec<Solution> = values
                    .rows
                    .iter()
                    .map(|row| {
                        values
                            .variables
                            .iter()
                            .zip(row)
                            .filter_map(|(v, t)| t.clone().map(|t| (v.clone(), t)))
                            .collect()
                    })
                    .collect();
                join(&current, &rows)
            }
            other => panic!("evaluator does not support {other:?}"),
        };
    }
    current
}

fn compatible(a: &Solution, b: &Solution) -> bool {
    a.iter().all(|(k, v)| b.get(k).is_none_or(|w| w == v))
}

fn merge(a: &Solution, b: &Solution) -> Solution {
    let mut out = a.clone();
    out.extend(b.iter().map(|(k, v)| (k.clone(), v.clone())));
    out
}

fn join(left: &[Solution], right: &[Solution]) -> Vec<Solution> {
    let mut out = Vec::new();
    for a in left {
        for b in right {
            if compatible(a, b) {
                out.push(merge(a, b));
            }
        }
    }
    out
}

fn left_join(left: &[Solution], right: &[Solution]) -> Vec<Solution> {
    let mut out = Vec::new();
    for a in left {
        let matches: Vec<Solution> = right.iter().filter(|b| compatible(a, b)).map(|b| merge(a, b)).collect();
        if matches.is_empty() {
            out.push(a.clone());
        } else {
            out.extend(matches);
        }
    }
    out
}

fn slot(term: &VarOrTerm) -> Result<String, Term> {
    match term {
        VarOrTerm::Variable(v) => Ok(v.clone()),
        VarOrTerm::Term(Term::BlankNode(b)) => Ok(format!("_:{b}")),
        VarOrTerm::Term(t) => Err(t.clone()),
    }
}

fn bind(solution: &mut Solution, pattern: &Result<String, Term>, value: &Term) -> bool {
    match pattern {
        Err(fixed) => fixed == value,
        Ok(var) => match solution.get(var) {
            Some(existing) => existing == value,
            None => {
                solution.insert(var.clone(), value.clone());
                true
            }
        },
    }
}

fn join_pattern(current: Vec<Solution>, pattern: &TriplePattern, data: &[Triple]) -> Vec<Solution> {
    let s = slot(&pattern.subject);
    let o = slot(&pattern.object);
    let p: Result<String, Term> = match &pattern.predicate {
        Predicate::Variable(v) => Ok(v.clone()),
        Predicate::Path(_) => Err(Term::Iri(
            pattern.predicate.link().expect("only plain links are supported").to_string(),
        )),
    };
    let mut out = Vec::new();
    for solution in current {
        for triple in data {
            let mut candidate = solution.clone();
            if bind(&mut candidate, &s, &triple.subject)
                && bind(&mut candidate, &p, &triple.predicate)
                && bind(&mut candidate, &o, &triple.object)
            {
                out.push(candidate);
            }
        }
    }
    out
}
