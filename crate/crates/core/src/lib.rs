//! Embedding-indexed knowledge object store and the curation agents built on it.
//!
//! The crate is organised in layers:
//!
//! - [`object`]: tree-structured [`CuratedObject`] records and their canonical text form.
//! - [`store`]: collections, the embedding index, KNN/MMR search, projection and bundles.
//! - [`providers`]: completion and embedding models, including a deterministic mock.
//! - [`sources`]: dynamic wrappers (PubMed, Wikipedia) and static ingest loaders.
//! - [`agents`]: Search, Chat, Curate, Extract, CiteSeek, Match and Bootstrap.
//! - [`schema`]: the small class/attribute/enum schema model used by Extract and Bootstrap.

pub mod agents;
pub mod http;
pub mod object;
pub mod prompts;
pub mod providers;
pub mod schema;
pub mod sources;
pub mod store;

pub use object::{canonical_serialize, CanonicalOptions, CuratedObject, Relationship};
pub use schema::SchemaSpec;
pub use store::{Collection, DistanceMetric, SearchHit, Store};
