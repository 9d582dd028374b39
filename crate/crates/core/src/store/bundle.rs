//! Shareable index bundles.
//!
//! A bundle is a directory with three files:
//!
//! - `objects.jsonl`: one object per line, canonical field order.
//! - `vectors.f32le`: row-major little-endian `f32`, rows in `objects.jsonl` order.
//! - `index_meta.yaml`: bundle version, collection name and index metadata.
//!
//! A `schema.yaml` is written too when the collection carries a schema.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::index::{EmbeddingIndex, IndexMetadata};
use super::{Collection, DistanceMetric, StoreError};
use crate::object::CuratedObject;
use crate::schema::SchemaSpec;

pub const BUNDLE_VERSION: &str = "1";

pub(crate) const OBJECTS_FILE: &str = "objects.jsonl";
pub(crate) const VECTORS_FILE: &str = "vectors.f32le";
pub(crate) const META_FILE: &str = "index_meta.yaml";
const SCHEMA_FILE: &str = "schema.yaml";

#[derive(Debug, Serialize, Deserialize)]
struct BundleMeta {
    bundle_version: String,
    collection: String,
    embedding_model_name: String,
    source_dataset: String,
    created_at: String,
    dimension: usize,
    metric: DistanceMetric,
    object_count: usize,
}

pub fn export_bundle(collection: &Collection, dir: &Path) -> Result<(), StoreError> {
    if !collection.is_fresh() {
        return Err(StoreError::StaleIndex);
    }
    let index = collection.index().expect("fresh");
    fs::create_dir_all(dir).map_err(|e| StoreError::io(dir, e))?;

    let mut lines = String::new();
    let mut vectors = Vec::with_capacity(collection.len() * index.dimension * 4);
    for obj in collection.objects() {
        lines.push_str(&serde_json::to_string(obj).map_err(|e| StoreError::Serde(e.to_string()))?);
        lines.push('\n');
        for v in &index.rows[obj.id.as_str()] {
            vectors.extend_from_slice(&v.to_le_bytes());
        }
    }
    let meta = &index.metadata;
    let record = BundleMeta {
        bundle_version: BUNDLE_VERSION.to_string(),
        collection: collection.name().to_string(),
        embedding_model_name: meta.embedding_model_name.clone(),
        source_dataset: meta.source_dataset.clone(),
        created_at: meta.created_at.to_rfc3339_opts(SecondsFormat::Micros, true),
        dimension: meta.dimension,
        metric: meta.metric,
        object_count: meta.object_count,
    };
    let meta_text = serde_yaml::to_string(&record).map_err(|e| StoreError::Serde(e.to_string()))?;

    write_atomic(&dir.join(OBJECTS_FILE), lines.as_bytes())?;
    write_atomic(&dir.join(VECTORS_FILE), &vectors)?;
    if let Some(schema) = collection.schema() {
        write_atomic(&dir.join(SCHEMA_FILE), schema.to_yaml().as_bytes())?;
    }
    write_atomic(&dir.join(META_FILE), meta_text.as_bytes())
}

pub fn import_bundle(dir: &Path) -> Result<Collection, StoreError> {
    let meta_path = dir.join(META_FILE);
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| StoreError::io(&meta_path, e))?;
    let record: BundleMeta = serde_yaml::from_str(&meta_text)
        .map_err(|e| StoreError::CorruptBundle(format!("{META_FILE}: {e}")))?;
    if record.bundle_version != BUNDLE_VERSION {
        return Err(StoreError::UnsupportedVersion(record.bundle_version));
    }
    let created_at = DateTime::parse_from_rfc3339(&record.created_at)
        .map_err(|e| StoreError::CorruptBundle(format!("created_at: {e}")))?
        .with_timezone(&Utc);

    let objects_path = dir.join(OBJECTS_FILE);
    let text = fs::read_to_string(&objects_path).map_err(|e| StoreError::io(&objects_path, e))?;
    let mut objects = IndexMap::new();
    for (lineno, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let obj: CuratedObject = serde_json::from_str(line)
            .map_err(|e| StoreError::CorruptBundle(format!("{OBJECTS_FILE} line {}: {e}", lineno + 1)))?;
        obj.validate()?;
        if objects.insert(obj.id.clone(), obj).is_some() {
            return Err(StoreError::CorruptBundle(format!(
                "{OBJECTS_FILE} line {}: duplicate id",
                lineno + 1
            )));
        }
    }

    let vectors_path = dir.join(VECTORS_FILE);
    let bytes = fs::read(&vectors_path).map_err(|e| StoreError::io(&vectors_path, e))?;
    let dimension = record.dimension;
    if dimension == 0 || objects.len() != record.object_count {
        return Err(StoreError::CorruptBundle(format!(
            "metadata declares {} objects of dimension {}, objects file has {}",
            record.object_count,
            dimension,
            objects.len()
        )));
    }
    let row_bytes = dimension * 4;
    if bytes.len() != row_bytes * objects.len() {
        return Err(StoreError::CorruptBundle(format!(
            "{VECTORS_FILE} holds {} bytes, expected {} rows of {} bytes",
            bytes.len(),
            objects.len(),
            row_bytes
        )));
    }
    let rows: IndexMap<String, Vec<f32>> = objects
        .keys()
        .zip(bytes.chunks_exact(row_bytes))
        .map(|(id, chunk)| {
            let row = chunk
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            (id.clone(), row)
        })
        .collect();
    if rows.values().any(|r| super::is_zero_vector(r)) {
        return Err(StoreError::CorruptBundle("bundle contains a zero vector".into()));
    }

    let schema_path = dir.join(SCHEMA_FILE);
    let schema = if schema_path.exists() {
        let text = fs::read_to_string(&schema_path).map_err(|e| StoreError::io(&schema_path, e))?;
        Some(SchemaSpec::from_yaml(&text).map_err(|e| StoreError::CorruptBundle(e.to_string()))?)
    } else {
        None
    };

    let metadata = IndexMetadata {
        embedding_model_name: record.embedding_model_name,
        source_dataset: record.source_dataset,
        created_at,
        dimension,
        metric: record.metric,
        object_count: record.object_count,
    };
    let index = EmbeddingIndex {
        dimension,
        metric: record.metric,
        rows,
        stale_ids: BTreeSet::new(),
        metadata,
    };
    Ok(Collection::from_parts(
        record.collection,
        record.metric,
        objects,
        schema,
        Some(index),
    ))
}

/// Write-temp-then-rename so readers never see a half-written file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let parent = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| StoreError::io(parent, e))?;
    tmp.write_all(bytes).map_err(|e| StoreError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| StoreError::io(path, e))?;
    tmp.persist(path).map_err(|e| StoreError::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::HashEmbedder;
    use crate::store::IndexOptions;

    fn indexed(n: usize) -> Collection {
        let mut c = Collection::new("bundle_test");
        c.upsert(
            (0..n)
                .map(|i| {
                    CuratedObject::new(format!("Obj{i}"), format!("object number {i}"))
                        .with_definition(format!("definition {i}"))
                })
                .collect(),
        )
        .unwrap();
        c.build_index(&HashEmbedder::new(32), IndexOptions::default()).unwrap();
        c
    }

    #[test]
    fn round_trip_is_exact() {
        let c = indexed(5);
        let dir = tempfile::tempdir().unwrap();
        export_bundle(&c, dir.path()).unwrap();
        let back = import_bundle(dir.path()).unwrap();
        assert_eq!(back.objects().collect::<Vec<_>>(), c.objects().collect::<Vec<_>>());
        for (id, row) in &c.index().unwrap().rows {
            let other = &back.index().unwrap().rows[id];
            let a: Vec<u32> = row.iter().map(|x| x.to_bits()).collect();
            let b: Vec<u32> = other.iter().map(|x| x.to_bits()).collect();
            assert_eq!(a, b);
        }
        assert_eq!(back.metadata(), c.metadata());
        assert_eq!(back.name(), c.name());
    }

    #[test]
    fn metadata_file_is_byte_stable() {
        let c = indexed(3);
        let first = tempfile::tempdir().unwrap();
        let second = tempfile::tempdir().unwrap();
        export_bundle(&c, first.path()).unwrap();
        let back = import_bundle(first.path()).unwrap();
        export_bundle(&back, second.path()).unwrap();
        for file in [META_FILE, OBJECTS_FILE, VECTORS_FILE] {
            assert_eq!(
                fs::read(first.path().join(file)).unwrap(),
                fs::read(second.path().join(file)).unwrap(),
                "{file}"
            );
        }
    }

    #[test]
    fn missing_row_is_corrupt() {
        let c = indexed(5);
        let dir = tempfile::tempdir().unwrap();
        export_bundle(&c, dir.path()).unwrap();
        let path = dir.path().join(VECTORS_FILE);
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 32 * 4]).unwrap();
        assert!(matches!(import_bundle(dir.path()), Err(StoreError::CorruptBundle(_))));
    }

    #[test]
    fn unknown_version_is_rejected() {
        let c = indexed(2);
        let dir = tempfile::tempdir().unwrap();
        export_bundle(&c, dir.path()).unwrap();
        let path = dir.path().join(META_FILE);
        let text = fs::read_to_string(&path).unwrap().replace("bundle_version: '1'", "bundle_version: '9'");
        fs::write(&path, text).unwrap();
        assert!(matches!(import_bundle(dir.path()), Err(StoreError::UnsupportedVersion(v)) if v == "9"));
    }

    #[test]
    fn stale_collection_cannot_be_exported() {
        let mut c = indexed(2);
        c.insert(CuratedObject::new("New", "new")).unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(export_bundle(&c, dir.path()), Err(StoreError::StaleIndex)));
    }
}
