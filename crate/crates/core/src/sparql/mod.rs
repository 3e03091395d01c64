//! SPARQL tokenizer, parser, serializer and query analyses.

mod analysis;
mod ast;
mod parser;
mod serializer;
mod token;

pub use analysis::{
    count_triple_patterns, extract_triple_patterns, is_federated, service_endpoints, undeclared_prefixes,
    used_prefixes, with_limit, Context, ContextPath, Scope,
};
pub use ast::*;
pub use parser::{parse_query, ParseError};
pub use serializer::{expression_text, path_text, serialize_query, term_text, SerializeError};
pub use token::{tokenize, Token, TokenKind, TokenizeError};
