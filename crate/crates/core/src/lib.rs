pub mod rdf;
pub mod sparql;
pub mod store;
pub mod validate;
pub mod fix;
pub mod viz;
pub mod publish;
pub mod client;
pub mod mock;
pub mod service;
