use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::Deserialize;

use super::SourceError;
use crate::agents::{mint_id, mint_unique_id};
use crate::object::{CuratedObject, Relationship};

const OBO_PURL: &str = "http://purl.obolibrary.org/obo/";

#[derive(Debug, Deserialize)]
struct GraphDocument {
    #[serde(default)]
    graphs: Vec<Graph>,
}

#[derive(Debug, Deserialize)]
struct Graph {
    #[serde(default)]
    nodes: Vec<Node>,
    #[serde(default)]
    edges: Vec<Edge>,
}

#[derive(Debug, Deserialize)]
struct Node {
    id: String,
    #[serde(default)]
    lbl: Option<String>,
    #[serde(default, rename = "type")]
    kind: Option<String>,
    #[serde(default)]
    meta: Option<Meta>,
}

#[derive(Debug, Default, Deserialize)]
struct Meta {
    #[serde(default)]
    definition: Option<Definition>,
    #[serde(default)]
    synonyms: Vec<Synonym>,
    #[serde(default)]
    deprecated: bool,
}

#[derive(Debug, Deserialize)]
struct Definition {
    val: String,
}

#[derive(Debug, Deserialize)]
struct Synonym {
    val: String,
}

#[derive(Debug, Deserialize)]
struct Edge {
    sub: String,
    pred: String,
    obj: String,
}

/// Result of an ontology load. Nodes without a label are counted, not loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct OntologyLoad {
    pub objects: Vec<CuratedObject>,
    pub skipped_unlabeled: usize,
}

/// `http://purl.obolibrary.org/obo/FOODON_00001278` → `FOODON:00001278`.
/// Anything that is not an OBO PURL is returned unchanged.
pub fn iri_to_curie(iri: &str) -> String {
    match iri.strip_prefix(OBO_PURL) {
        Some(local) => match local.split_once('_') {
            Some((prefix, rest)) if !prefix.is_empty() && !prefix.contains('/') => format!("{prefix}:{rest}"),
            _ => local.to_string(),
        },
        None => iri.to_string(),
    }
}

pub fn load_ontology(path: &Path) -> Result<OntologyLoad, SourceError> {
    let text = std::fs::read_to_string(path).map_err(|e| SourceError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    load_ontology_str(&text)
}

pub fn load_ontology_str(text: &str) -> Result<OntologyLoad, SourceError> {
    let doc: GraphDocument = serde_json::from_str(text).map_err(|e| SourceError::parse("ontology graph", e))?;

    // Property labels become predicate names.
    let mut property_names: HashMap<&str, String> = HashMap::new();
    let mut term_nodes: Vec<&Node> = Vec::new();
    let mut skipped_unlabeled = 0;
    for node in doc.graphs.iter().flat_map(|g| &g.nodes) {
        let label = node.lbl.as_deref().map(str::trim).filter(|l| !l.is_empty());
        if node.kind.as_deref() == Some("PROPERTY") {
            if let Some(name) = label.and_then(|l| mint_id(l).ok()) {
                property_names.insert(node.id.as_str(), name);
            }
            continue;
        }
        if node.kind.as_deref().is_some_and(|k| k != "CLASS") {
            continue;
        }
        if node.meta.as_ref().is_some_and(|m| m.deprecated) {
            continue;
        }
        if label.is_none() || label.is_some_and(|l| mint_id(l).is_err()) {
            skipped_unlabeled += 1;
            continue;
        }
        term_nodes.push(node);
    }

    let mut ids: HashMap<&str, String> = HashMap::new();
    let mut taken: HashSet<String> = HashSet::new();
    for node in &term_nodes {
        if ids.contains_key(node.id.as_str()) {
            continue;
        }
        let label = node.lbl.as_deref().unwrap_or_default().trim();
        let id = mint_unique_id(label, |c| taken.contains(c)).map_err(|e| SourceError::parse("ontology label", e))?;
        taken.insert(id.clone());
        ids.insert(node.id.as_str(), id);
    }

    let mut relationships: HashMap<&str, Vec<Relationship>> = HashMap::new();
    for edge in doc.graphs.iter().flat_map(|g| &g.edges) {
        if !ids.contains_key(edge.sub.as_str()) {
            continue;
        }
        let predicate = match edge.pred.as_str() {
            "is_a" => "subclassOf".to_string(),
            other => property_names
                .get(other)
                .cloned()
                .unwrap_or_else(|| iri_to_curie(other)),
        };
        let target = ids.get(edge.obj.as_str()).cloned().unwrap_or_else(|| iri_to_curie(&edge.obj));
        let rels = relationships.entry(edge.sub.as_str()).or_default();
        let rel = Relationship::new(predicate, target);
        if !rels.contains(&rel) {
            rels.push(rel);
        }
    }

    let mut seen = HashSet::new();
    let mut objects = Vec::with_capacity(term_nodes.len());
    for node in term_nodes {
        if !seen.insert(node.id.as_str()) {
            continue;
        }
        let label = node.lbl.as_deref().unwrap_or_default().trim();
        let mut obj = CuratedObject::new(ids[node.id.as_str()].clone(), label).with_original_id(iri_to_curie(&node.id));
        if let Some(meta) = &node.meta {
            obj.definition = meta.definition.as_ref().map(|d| d.val.trim().to_string()).filter(|d| !d.is_empty());
            for syn in &meta.synonyms {
                let s = syn.val.trim();
                if !s.is_empty() && !obj.aliases.iter().any(|a| a == s) {
                    obj.aliases.push(s.to_string());
                }
            }
        }
        obj.relationships = relationships.remove(node.id.as_str()).unwrap_or_default();
        objects.push(obj);
    }
    Ok(OntologyLoad {
        objects,
        skipped_unlabeled,
    })
}
