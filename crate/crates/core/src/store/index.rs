use std::collections::BTreeSet;

use chrono::{DateTime, SubsecRound, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::DistanceMetric;

pub const DEFAULT_BATCH_SIZE: usize = 100;

/// Descriptive record carried with every index: which model embedded what, and when.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexMetadata {
    pub embedding_model_name: String,
    pub source_dataset: String,
    pub created_at: DateTime<Utc>,
    pub dimension: usize,
    pub metric: DistanceMetric,
    pub object_count: usize,
}

impl IndexMetadata {
    pub(crate) fn now(model: &str, dataset: &str, dimension: usize, metric: DistanceMetric, count: usize) -> Self {
        Self {
            embedding_model_name: model.to_string(),
            source_dataset: dataset.to_string(),
            // Microsecond precision survives the RFC 3339 text round-trip.
            created_at: Utc::now().trunc_subsecs(6),
            dimension,
            metric,
            object_count: count,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingIndex {
    pub dimension: usize,
    pub metric: DistanceMetric,
    pub rows: IndexMap<String, Vec<f32>>,
    pub stale_ids: BTreeSet<String>,
    pub metadata: IndexMetadata,
}

impl EmbeddingIndex {
    pub fn row(&self, id: &str) -> Option<&[f32]> {
        self.rows.get(id).map(Vec::as_slice)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexOptions {
    pub batch_size: usize,
}

impl Default for IndexOptions {
    fn default() -> Self {
        Self {
            batch_size: DEFAULT_BATCH_SIZE,
        }
    }
}
