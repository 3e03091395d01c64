use std::fmt;

use crate::rdf::{PrefixMap, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dialect {
    /// SPARQL 1.1 query grammar only.
    #[default]
    Strict,
    /// Additionally accepts Blazegraph named subqueries
    /// (`WITH { ... } AS %name` and `INCLUDE %name`).
    Extended,
}

#[derive(Debug, Clone, Default)]
pub struct Prologue {
    pub base: Option<String>,
    pub prefixes: PrefixMap,
    /// Fallback bindings that were used because the query did not declare
    /// them itself.
    pub injected: PrefixMap,
}

impl Prologue {
    /// Declared bindings followed by injected ones.
    pub fn effective_prefixes(&self) -> PrefixMap {
        let mut all = self.prefixes.clone();
        all.merge_missing(&self.injected);
        all
    }
}

/// Prologues compare by base and effective bindings, so a query whose
/// injected prefixes were written out compares equal to the original.
impl PartialEq for Prologue {
    fn eq(&self, other: &Self) -> bool {
        self.base == other.base && self.effective_prefixes().sorted() == other.effective_prefixes().sorted()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub prologue: Prologue,
    pub form: QueryForm,
    pub dataset: Vec<DatasetClause>,
    /// Only populated by the extended dialect.
    pub named_subqueries: Vec<NamedSubquery>,
    /// `None` only for a DESCRIBE without a WHERE clause.
    pub where_clause: Option<GroupPattern>,
    pub modifiers: SolutionModifiers,
    pub values: Option<InlineData>,
}

impl Query {
    pub fn kind(&self) -> QueryKind {
        match self.form {
            QueryForm::Select(_) => QueryKind::Select,
            QueryForm::Ask => QueryKind::Ask,
            QueryForm::Construct(_) => QueryKind::Construct,
            QueryForm::Describe(_) => QueryKind::Describe,
        }
    }

    pub fn projection(&self) -> Option<&Projection> {
        match &self.form {
            QueryForm::Select(select) => Some(&select.projection),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum QueryKind {
    Select,
    Ask,
    Construct,
    Describe,
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryKind::Select => "SELECT",
            QueryKind::Ask => "ASK",
            QueryKind::Construct => "CONSTRUCT",
            QueryKind::Describe => "DESCRIBE",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryForm {
    Select(SelectClause),
    Ask,
    Construct(Vec<TriplePattern>),
    Describe(DescribeTargets),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectClause {
    pub modifier: Option<SelectModifier>,
    pub projection: Projection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectModifier {
    Distinct,
    Reduced,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    Star,
    Items(Vec<ProjectionItem>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionItem {
    Variable(String),
    Expression { expression: Expression, alias: String },
}

impl ProjectionItem {
    pub fn variable(&self) -> &str {
        match self {
            ProjectionItem::Variable(v) => v,
            ProjectionItem::Expression { alias, .. } => alias,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DescribeTargets {
    Star,
    Terms(Vec<VarOrTerm>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetClause {
    pub named: bool,
    pub iri: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedSubquery {
    pub name: String,
    pub query: Box<Query>,
}

/// GROUP BY, HAVING and ORDER BY are kept as token spans.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolutionModifiers {
    pub group_by: Option<Expression>,
    pub having: Option<Expression>,
    pub order_by: Option<Expression>,
    pub limit: Option<u64>,
    pub offset: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroupPattern {
    pub elements: Vec<GroupElement>,
}

impl GroupPattern {
    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroupElement {
    Bgp(Vec<TriplePattern>),
    /// A nested `{ ... }` that is not part of a UNION.
    Group(GroupPattern),
    Optional(GroupPattern),
    Union(Vec<GroupPattern>),
    Graph { name: VarOrTerm, pattern: GroupPattern },
    Service { endpoint: VarOrTerm, silent: bool, pattern: GroupPattern },
    SubSelect(Box<Query>),
    Filter(Expression),
    Bind { expression: Expression, variable: String },
    Values(InlineData),
    Minus(GroupPattern),
    /// Extended dialect only.
    NamedInclude(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarOrTerm {
    Variable(String),
    Term(Term),
}

impl VarOrTerm {
    pub fn iri(value: impl Into<String>) -> Self {
        VarOrTerm::Term(Term::Iri(value.into()))
    }

    pub fn as_iri(&self) -> Option<&str> {
        match self {
            VarOrTerm::Term(term) => term.as_iri(),
            VarOrTerm::Variable(_) => None,
        }
    }

    pub fn as_variable(&self) -> Option<&str> {
        match self {
            VarOrTerm::Variable(v) => Some(v),
            VarOrTerm::Term(_) => None,
        }
    }
}

impl fmt::Display for VarOrTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarOrTerm::Variable(v) => write!(f, "?{v}"),
            VarOrTerm::Term(term) => term.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TriplePattern {
    pub subject: VarOrTerm,
    pub predicate: Predicate,
    pub object: VarOrTerm,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Predicate {
    Variable(String),
    Path(PropertyPath),
}

impl Predicate {
    pub fn link(&self) -> Option<&str> {
        match self {
            Predicate::Path(PropertyPath::Link(iri)) => Some(iri),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PropertyPath {
    Link(String),
    Inverse(Box<PropertyPath>),
    /// At least two members.
    Sequence(Vec<PropertyPath>),
    /// At least two members.
    Alternative(Vec<PropertyPath>),
    ZeroOrMore(Box<PropertyPath>),
    OneOrMore(Box<PropertyPath>),
    ZeroOrOne(Box<PropertyPath>),
    NegatedSet(Vec<NegatedLink>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NegatedLink {
    pub iri: String,
    pub inverse: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InlineData {
    pub variables: Vec<String>,
    /// `None` is UNDEF.
    pub rows: Vec<Vec<Option<Term>>>,
}

/// An expression kept as canonical token text. `EXISTS` / `NOT EXISTS`
/// groups are parsed so their patterns stay visible to rewrites.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Expression {
    pub parts: Vec<ExprPart>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprPart {
    Token(String),
    Exists { negated: bool, pattern: GroupPattern },
}

impl Expression {
    /// Variables mentioned directly in the expression, in order, without
    /// duplicates. Variables inside EXISTS groups are not included.
    pub fn variables(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for part in &self.parts {
            if let ExprPart::Token(text) = part {
                if let Some(name) = text.strip_prefix('?') {
                    if !out.iter().any(|v| v == name) {
                        out.push(name.to_string());
                    }
                }
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }
}
