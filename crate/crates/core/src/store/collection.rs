use std::collections::BTreeSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::index::{EmbeddingIndex, IndexMetadata, IndexOptions};
use super::metric::{is_zero_vector, DistanceMetric};
use super::StoreError;
use crate::object::{canonical_serialize_with, CanonicalOptions, CuratedObject};
use crate::providers::Embedder;
use crate::schema::SchemaSpec;

/// An object id paired with its index vector.
pub type Candidate = (String, Vec<f32>);

/// One retrieval result. Ranks start at 1 with no gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub object_id: String,
    pub distance: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpsertReport {
    pub inserted: usize,
    pub updated: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    Text(String),
    Vector(Vec<f32>),
}

impl From<&str> for Query {
    fn from(s: &str) -> Self {
        Query::Text(s.to_string())
    }
}

impl From<Vec<f32>> for Query {
    fn from(v: Vec<f32>) -> Self {
        Query::Vector(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Collection {
    name: String,
    metric: DistanceMetric,
    objects: IndexMap<String, CuratedObject>,
    schema: Option<SchemaSpec>,
    index: Option<EmbeddingIndex>,
    canonical: CanonicalOptions,
}

impl Collection {
    pub fn new(name: impl Into<String>) -> Self {
        Self::with_metric(name, DistanceMetric::default())
    }

    pub fn with_metric(name: impl Into<String>, metric: DistanceMetric) -> Self {
        Self {
            name: name.into(),
            metric,
            objects: IndexMap::new(),
            schema: None,
            index: None,
            canonical: CanonicalOptions::default(),
        }
    }

    pub(crate) fn from_parts(
        name: String,
        metric: DistanceMetric,
        objects: IndexMap<String, CuratedObject>,
        schema: Option<SchemaSpec>,
        index: Option<EmbeddingIndex>,
    ) -> Self {
        Self {
            name,
            metric,
            objects,
            schema,
            index,
            canonical: CanonicalOptions::default(),
        }
    }

    /// The same collection under another name. Index metadata keeps the
    /// original source dataset.
    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn metric(&self) -> DistanceMetric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&CuratedObject> {
        self.objects.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.objects.contains_key(id)
    }

    /// Objects in insertion order.
    pub fn objects(&self) -> impl Iterator<Item = &CuratedObject> {
        self.objects.values()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.objects.get_index_of(id)
    }

    pub fn schema(&self) -> Option<&SchemaSpec> {
        self.schema.as_ref()
    }

    pub fn set_schema(&mut self, schema: Option<SchemaSpec>) {
        self.schema = schema;
    }

    pub fn index(&self) -> Option<&EmbeddingIndex> {
        self.index.as_ref()
    }

    pub fn metadata(&self) -> Option<&IndexMetadata> {
        self.index.as_ref().map(|i| &i.metadata)
    }

    pub fn canonical_options(&self) -> CanonicalOptions {
        self.canonical
    }

    pub fn set_canonical_options(&mut self, options: CanonicalOptions) {
        self.canonical = options;
    }

    /// Text the embedder sees for `obj`.
    pub fn embedding_text(&self, obj: &CuratedObject) -> String {
        canonical_serialize_with(obj, self.canonical)
    }

    /// True when every object has a current row.
    pub fn is_fresh(&self) -> bool {
        match &self.index {
            None => false,
            Some(index) => {
                index.stale_ids.is_empty()
                    && index.rows.len() == self.objects.len()
                    && self.objects.keys().all(|id| index.rows.contains_key(id))
            }
        }
    }

    /// Ids that the next [`Collection::build_index`] call will embed.
    pub fn pending_ids(&self) -> Vec<String> {
        match &self.index {
            None => self.objects.keys().cloned().collect(),
            Some(index) => self
                .objects
                .keys()
                .filter(|id| index.stale_ids.contains(*id) || !index.rows.contains_key(*id))
                .cloned()
                .collect(),
        }
    }

    /// Stable digest of object content in insertion order; ignores the index.
    pub fn content_digest(&self) -> String {
        let mut hasher = Sha256::new();
        for obj in self.objects.values() {
            hasher.update(serde_json::to_vec(obj).expect("objects serialize"));
            hasher.update(b"\n");
        }
        hex_lower(&hasher.finalize())
    }

    pub fn upsert(&mut self, batch: Vec<CuratedObject>) -> Result<UpsertReport, StoreError> {
        let mut seen = BTreeSet::new();
        for obj in &batch {
            obj.validate()?;
            if !seen.insert(obj.id.as_str()) {
                return Err(StoreError::DuplicateInBatch(obj.id.clone()));
            }
        }
        let mut report = UpsertReport::default();
        for obj in batch {
            match self.objects.get_mut(&obj.id) {
                Some(existing) if *existing == obj => {}
                Some(existing) => {
                    let id = obj.id.clone();
                    *existing = obj;
                    report.updated += 1;
                    self.mark_stale(id);
                }
                None => {
                    let id = obj.id.clone();
                    self.objects.insert(id.clone(), obj);
                    report.inserted += 1;
                    self.mark_stale(id);
                }
            }
        }
        Ok(report)
    }

    /// Adds a brand-new object; an existing id is a conflict.
    pub fn insert(&mut self, obj: CuratedObject) -> Result<(), StoreError> {
        obj.validate()?;
        if self.objects.contains_key(&obj.id) {
            return Err(StoreError::ObjectExists(obj.id));
        }
        let id = obj.id.clone();
        self.objects.insert(id.clone(), obj);
        self.mark_stale(id);
        Ok(())
    }

    pub fn remove(&mut self, id: &str) -> Result<CuratedObject, StoreError> {
        let obj = self
            .objects
            .shift_remove(id)
            .ok_or_else(|| StoreError::ObjectNotFound(id.to_string()))?;
        if let Some(index) = &mut self.index {
            index.rows.shift_remove(id);
            index.stale_ids.remove(id);
            index.metadata.object_count = index.rows.len();
        }
        Ok(obj)
    }

    fn mark_stale(&mut self, id: String) {
        if let Some(index) = &mut self.index {
            index.stale_ids.insert(id);
        }
    }

    /// Embeds every object that is new or changed since the last build.
    ///
    /// A collection with no pending ids makes no embedder calls. Rows are
    /// committed only after every batch succeeds.
    pub fn build_index(
        &mut self,
        embedder: &dyn Embedder,
        options: IndexOptions,
    ) -> Result<IndexMetadata, StoreError> {
        if self.objects.is_empty() {
            return Err(StoreError::EmptyCollection);
        }
        if options.batch_size == 0 {
            return Err(StoreError::InvalidArgument("batch size must be positive".into()));
        }
        let model_changed = self
            .index
            .as_ref()
            .is_some_and(|i| i.metadata.embedding_model_name != embedder.model_name());
        if model_changed {
            self.index = None;
        }
        let pending = self.pending_ids();
        if pending.is_empty() {
            if let Some(index) = &self.index {
                return Ok(index.metadata.clone());
            }
        }

        let mut dimension = self.index.as_ref().map(|i| i.dimension);
        let mut fresh_rows = Vec::with_capacity(pending.len());
        for chunk in pending.chunks(options.batch_size) {
            let texts: Vec<String> = chunk
                .iter()
                .map(|id| self.embedding_text(&self.objects[id.as_str()]))
                .collect();
            let vectors = embedder.embed(&texts)?;
            if vectors.len() != chunk.len() {
                return Err(StoreError::Embedder(crate::providers::ProviderError::EmbedderFailure(
                    format!("asked for {} vectors, got {}", chunk.len(), vectors.len()),
                )));
            }
            for (id, vector) in chunk.iter().zip(vectors) {
                let expected = *dimension.get_or_insert(vector.len());
                if vector.len() != expected || expected == 0 {
                    return Err(StoreError::DimensionMismatch {
                        expected,
                        got: vector.len(),
                    });
                }
                if is_zero_vector(&vector) {
                    return Err(StoreError::ZeroVector);
                }
                fresh_rows.push((id.clone(), vector));
            }
        }

        let dimension = dimension.expect("at least one object was embedded");
        let mut index = self.index.take().unwrap_or_else(|| EmbeddingIndex {
            dimension,
            metric: self.metric,
            rows: IndexMap::new(),
            stale_ids: BTreeSet::new(),
            metadata: IndexMetadata::now(embedder.model_name(), &self.name, dimension, self.metric, 0),
        });
        for (id, vector) in fresh_rows {
            index.rows.insert(id, vector);
        }
        index.rows.retain(|id, _| self.objects.contains_key(id));
        // Row order follows object order so exports line up.
        let order = &self.objects;
        index
            .rows
            .sort_by(|a, _, b, _| order.get_index_of(a).cmp(&order.get_index_of(b)));
        index.stale_ids.clear();
        index.metadata = IndexMetadata::now(
            embedder.model_name(),
            &self.name,
            dimension,
            self.metric,
            index.rows.len(),
        );
        let metadata = index.metadata.clone();
        self.index = Some(index);
        Ok(metadata)
    }

    pub fn query_vector(
        &self,
        query: &Query,
        embedder: Option<&dyn Embedder>,
    ) -> Result<Vec<f32>, StoreError> {
        let index = self.index.as_ref().ok_or(StoreError::StaleIndex)?;
        let vector = match query {
            Query::Vector(v) => v.clone(),
            Query::Text(text) => {
                let embedder = embedder.ok_or(StoreError::NoEmbedder)?;
                let mut out = embedder.embed(std::slice::from_ref(text))?;
                out.pop().ok_or_else(|| {
                    StoreError::Embedder(crate::providers::ProviderError::EmbedderFailure(
                        "no vector returned for query".into(),
                    ))
                })?
            }
        };
        if vector.len() != index.dimension {
            return Err(StoreError::DimensionMismatch {
                expected: index.dimension,
                got: vector.len(),
            });
        }
        Ok(vector)
    }

    /// The `k` nearest objects, ascending by distance; ties keep insertion order.
    pub fn knn_search(
        &self,
        query: &Query,
        k: usize,
        embedder: Option<&dyn Embedder>,
    ) -> Result<Vec<SearchHit>, StoreError> {
        self.check_search(k)?;
        let vector = self.query_vector(query, embedder)?;
        Ok(self
            .ranked(&vector, k)?
            .into_iter()
            .enumerate()
            .map(|(i, (id, distance))| SearchHit {
                object_id: id.to_string(),
                distance,
                rank: i + 1,
            })
            .collect())
    }

    /// Like [`Collection::knn_search`] but returns the query vector and the
    /// candidate vectors too, ready for MMR.
    pub fn knn_candidates(
        &self,
        query: &Query,
        pool: usize,
        embedder: Option<&dyn Embedder>,
    ) -> Result<(Vec<f32>, Vec<Candidate>), StoreError> {
        self.check_search(pool)?;
        let vector = self.query_vector(query, embedder)?;
        let index = self.index.as_ref().expect("checked fresh");
        let candidates = self
            .ranked(&vector, pool)?
            .into_iter()
            .map(|(id, _)| (id.to_string(), index.rows[id].clone()))
            .collect();
        Ok((vector, candidates))
    }

    fn check_search(&self, k: usize) -> Result<(), StoreError> {
        if k == 0 {
            return Err(StoreError::InvalidArgument("k must be at least 1".into()));
        }
        if self.objects.is_empty() {
            return Err(StoreError::EmptyCollection);
        }
        if !self.is_fresh() {
            return Err(StoreError::StaleIndex);
        }
        Ok(())
    }

    fn ranked(&self, query: &[f32], k: usize) -> Result<Vec<(&str, f64)>, StoreError> {
        let index = self.index.as_ref().ok_or(StoreError::StaleIndex)?;
        let mut scored = Vec::with_capacity(self.objects.len());
        for id in self.objects.keys() {
            let row = &index.rows[id];
            scored.push((id.as_str(), self.metric.distance(query, row)?));
        }
        // Stable sort keeps insertion order among equal distances.
        scored.sort_by(|a, b| a.1.total_cmp(&b.1));
        scored.truncate(k);
        Ok(scored)
    }
}

pub(crate) fn hex_lower(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
