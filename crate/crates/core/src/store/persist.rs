//! The multi-collection store and its on-disk layout.
//!
//! Each collection lives in `<root>/<name>/`: a `collection.json` state file
//! that names the vectors file of the current generation, plus that
//! `vectors-<gen>.f32le` file. Vectors are written first, then the state file
//! is swapped in atomically, so a crash leaves the previous generation intact.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use super::bundle::write_atomic;
use super::index::{EmbeddingIndex, IndexMetadata};
use super::{Collection, DistanceMetric, StoreError};
use crate::object::CuratedObject;
use crate::schema::SchemaSpec;

pub type CollectionHandle = Arc<RwLock<Collection>>;

const STATE_FILE: &str = "collection.json";

#[derive(Serialize, Deserialize)]
struct StoredIndex {
    dimension: usize,
    embedding_model_name: String,
    source_dataset: String,
    created_at: DateTime<Utc>,
    row_ids: Vec<String>,
    stale_ids: BTreeSet<String>,
    vectors_file: String,
}

#[derive(Serialize, Deserialize)]
struct StoredCollection {
    name: String,
    metric: DistanceMetric,
    #[serde(default)]
    schema: Option<SchemaSpec>,
    objects: Vec<CuratedObject>,
    #[serde(default)]
    index: Option<StoredIndex>,
}

/// Named collections, each behind its own reader/writer lock.
#[derive(Debug, Default)]
pub struct Store {
    root: Option<PathBuf>,
    collections: RwLock<IndexMap<String, CollectionHandle>>,
}

impl Store {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) a store rooted at `root` and loads every collection in it.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| StoreError::io(&root, e))?;
        let mut dirs: Vec<PathBuf> = fs::read_dir(&root)
            .map_err(|e| StoreError::io(&root, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.join(STATE_FILE).is_file())
            .collect();
        dirs.sort();
        let mut collections = IndexMap::new();
        for dir in dirs {
            let collection = load_collection(&dir)?;
            collections.insert(collection.name().to_string(), Arc::new(RwLock::new(collection)));
        }
        Ok(Self {
            root: Some(root),
            collections: RwLock::new(collections),
        })
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn names(&self) -> Vec<String> {
        self.collections.read().keys().cloned().collect()
    }

    pub fn exists(&self, name: &str) -> bool {
        self.collections.read().contains_key(name)
    }

    pub fn get(&self, name: &str) -> Result<CollectionHandle, StoreError> {
        self.collections
            .read()
            .get(name)
            .cloned()
            .ok_or_else(|| StoreError::CollectionNotFound(name.to_string()))
    }

    /// Returns the named collection, creating an empty one if absent.
    pub fn get_or_create(&self, name: &str, metric: DistanceMetric) -> Result<CollectionHandle, StoreError> {
        validate_name(name)?;
        let mut map = self.collections.write();
        Ok(map
            .entry(name.to_string())
            .or_insert_with(|| Arc::new(RwLock::new(Collection::with_metric(name, metric))))
            .clone())
    }

    pub fn create(&self, name: &str, metric: DistanceMetric) -> Result<CollectionHandle, StoreError> {
        validate_name(name)?;
        let mut map = self.collections.write();
        if map.contains_key(name) {
            return Err(StoreError::CollectionExists(name.to_string()));
        }
        let handle = Arc::new(RwLock::new(Collection::with_metric(name, metric)));
        map.insert(name.to_string(), handle.clone());
        drop(map);
        self.save(name)?;
        Ok(handle)
    }

    /// Adds a whole collection (e.g. an imported bundle), replacing any of the same name.
    pub fn put(&self, collection: Collection) -> Result<CollectionHandle, StoreError> {
        validate_name(collection.name())?;
        let name = collection.name().to_string();
        let handle = Arc::new(RwLock::new(collection));
        self.collections.write().insert(name.clone(), handle.clone());
        self.save(&name)?;
        Ok(handle)
    }

    pub fn delete(&self, name: &str) -> Result<(), StoreError> {
        let removed = self.collections.write().shift_remove(name);
        if removed.is_none() {
            return Err(StoreError::CollectionNotFound(name.to_string()));
        }
        if let Some(root) = &self.root {
            let dir = root.join(name);
            if dir.exists() {
                fs::remove_dir_all(&dir).map_err(|e| StoreError::io(&dir, e))?;
            }
        }
        Ok(())
    }

    /// Persists one collection; a no-op for in-memory stores.
    pub fn save(&self, name: &str) -> Result<(), StoreError> {
        let Some(root) = &self.root else {
            return Ok(());
        };
        let handle = self.get(name)?;
        let collection = handle.read();
        save_collection(&root.join(name), &collection)
    }
}

fn validate_name(name: &str) -> Result<(), StoreError> {
    let ok = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
        && !name.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidArgument(format!(
            "collection name {name:?} must be non-empty ASCII letters, digits, '_', '-' or '.'"
        )))
    }
}

fn save_collection(dir: &Path, collection: &Collection) -> Result<(), StoreError> {
    fs::create_dir_all(dir).map_err(|e| StoreError::io(dir, e))?;
    let previous = read_state(dir).ok().and_then(|s| s.index.map(|i| i.vectors_file));

    let index = match collection.index() {
        None => None,
        Some(index) => {
            let generation = Utc::now().timestamp_nanos_opt().unwrap_or_default();
            let vectors_file = format!("vectors-{generation}.f32le");
            let mut bytes = Vec::with_capacity(index.rows.len() * index.dimension * 4);
            for row in index.rows.values() {
                for v in row {
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
            }
            write_atomic(&dir.join(&vectors_file), &bytes)?;
            Some(StoredIndex {
                dimension: index.dimension,
                embedding_model_name: index.metadata.embedding_model_name.clone(),
                source_dataset: index.metadata.source_dataset.clone(),
                created_at: index.metadata.created_at,
                row_ids: index.rows.keys().cloned().collect(),
                stale_ids: index.stale_ids.clone(),
                vectors_file,
            })
        }
    };
    let new_vectors = index.as_ref().map(|i| i.vectors_file.clone());
    let state = StoredCollection {
        name: collection.name().to_string(),
        metric: collection.metric(),
        schema: collection.schema().cloned(),
        objects: collection.objects().cloned().collect(),
        index,
    };
    let json = serde_json::to_vec_pretty(&state).map_err(|e| StoreError::Serde(e.to_string()))?;
    write_atomic(&dir.join(STATE_FILE), &json)?;

    if let Some(old) = previous {
        if Some(&old) != new_vectors.as_ref() {
            let _ = fs::remove_file(dir.join(old));
        }
    }
    Ok(())
}

fn read_state(dir: &Path) -> Result<StoredCollection, StoreError> {
    let path = dir.join(STATE_FILE);
    let text = fs::read(&path).map_err(|e| StoreError::io(&path, e))?;
    serde_json::from_slice(&text).map_err(|e| StoreError::Serde(format!("{}: {e}", path.display())))
}

fn load_collection(dir: &Path) -> Result<Collection, StoreError> {
    let state = read_state(dir)?;
    let mut objects = IndexMap::new();
    for obj in state.objects {
        objects.insert(obj.id.clone(), obj);
    }
    let index = match state.index {
        None => None,
        Some(stored) => {
            let path = dir.join(&stored.vectors_file);
            let bytes = fs::read(&path).map_err(|e| StoreError::io(&path, e))?;
            let row_bytes = stored.dimension * 4;
            if row_bytes == 0 || bytes.len() != row_bytes * stored.row_ids.len() {
                return Err(StoreError::CorruptBundle(format!(
                    "{} does not match {} rows of dimension {}",
                    path.display(),
                    stored.row_ids.len(),
                    stored.dimension
                )));
            }
            let rows: IndexMap<String, Vec<f32>> = stored
                .row_ids
                .into_iter()
                .zip(bytes.chunks_exact(row_bytes))
                .map(|(id, chunk)| {
                    let row = chunk
                        .chunks_exact(4)
                        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                        .collect();
                    (id, row)
                })
                .collect();
            Some(EmbeddingIndex {
                dimension: stored.dimension,
                metric: state.metric,
                metadata: IndexMetadata {
                    embedding_model_name: stored.embedding_model_name,
                    source_dataset: stored.source_dataset,
                    created_at: stored.created_at,
                    dimension: stored.dimension,
                    metric: state.metric,
                    object_count: rows.len(),
                },
                rows,
                stale_ids: stored.stale_ids,
            })
        }
    };
    Ok(Collection::from_parts(state.name, state.metric, objects, state.schema, index))
}
