//! Collections of curated objects with an embedding index.

mod bundle;
mod collection;
mod index;
mod metric;
mod mmr;
mod persist;
mod projection;

pub use bundle::{export_bundle, import_bundle, BUNDLE_VERSION};
pub use collection::{Candidate, Collection, Query, SearchHit, UpsertReport};
pub use index::{EmbeddingIndex, IndexMetadata, IndexOptions, DEFAULT_BATCH_SIZE};
pub use metric::{is_zero_vector, similarity, DistanceMetric};
pub use mmr::{mmr_rerank, MmrParams, DEFAULT_MMR_LAMBDA};
pub use persist::{CollectionHandle, Store};
pub use projection::{project_2d, ProjectedPoint, Projection};

use thiserror::Error;

use crate::object::ObjectError;
use crate::providers::ProviderError;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("collection {0:?} not found")]
    CollectionNotFound(String),
    #[error("collection {0:?} already exists")]
    CollectionExists(String),
    #[error("object {0:?} not found")]
    ObjectNotFound(String),
    #[error("object {0:?} already exists")]
    ObjectExists(String),
    #[error("id {0:?} appears more than once in the batch")]
    DuplicateInBatch(String),
    #[error("invalid object: {0}")]
    InvalidObject(#[from] ObjectError),
    #[error("collection is empty")]
    EmptyCollection,
    #[error("index is stale or missing; rebuild it first")]
    StaleIndex,
    #[error("vector dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero vector cannot be indexed or compared by cosine")]
    ZeroVector,
    #[error("no candidates to re-rank")]
    EmptyCandidates,
    #[error("need at least two indexed objects, found {0}")]
    InsufficientData(usize),
    #[error("embedder failure: {0}")]
    Embedder(#[from] ProviderError),
    #[error("embedding query text needs an embedder")]
    NoEmbedder,
    #[error("corrupt bundle: {0}")]
    CorruptBundle(String),
    #[error("unsupported bundle version {0}")]
    UnsupportedVersion(String),
    #[error("collection {0:?} is busy with a writer")]
    Busy(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Serde(String),
}

impl StoreError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        StoreError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
