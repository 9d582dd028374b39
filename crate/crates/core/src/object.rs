//! Curated objects and their canonical text rendering.
//!
//! The canonical form is a block-style YAML subset: fields appear in a fixed
//! order (`id`, `label`, `definition`, `aliases`, `relationships`,
//! `original_id`, then extras sorted by name), nested values are indented by
//! two spaces, and scalars are emitted plain only when they re-parse to the
//! same string. Everything else is double-quoted with JSON escapes.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Field names with a dedicated slot on [`CuratedObject`].
pub const RESERVED_FIELDS: [&str; 6] = [
    "id",
    "label",
    "definition",
    "aliases",
    "relationships",
    "original_id",
];

/// Default character budget for [`canonical_serialize`].
pub const DEFAULT_CHAR_BUDGET: usize = 4000;

/// Appended to canonical text cut at the character budget.
pub const TRUNCATION_MARKER: &str = "\n[truncated]";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Relationship {
    pub predicate: String,
    pub target: String,
}

impl Relationship {
    pub fn new(predicate: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            predicate: predicate.into(),
            target: target.into(),
        }
    }
}

/// A tree-structured knowledge record, equivalent to a JSON object with a
/// handful of well-known fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuratedObject {
    pub id: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definition: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relationships: Vec<Relationship>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_id: Option<String>,
    #[serde(flatten)]
    pub extras: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObjectError {
    #[error("object id is empty")]
    EmptyId,
    #[error("relationship {index} of {id} has an empty predicate or target")]
    IncompleteRelationship { id: String, index: usize },
    #[error("extra field name {0:?} is reserved or empty")]
    BadExtraField(String),
    #[error("extra field {0:?} is null; absent fields are omitted instead")]
    NullExtra(String),
}

impl CuratedObject {
    pub fn new(id: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            label: label.into(),
            definition: None,
            aliases: Vec::new(),
            relationships: Vec::new(),
            original_id: None,
            extras: BTreeMap::new(),
        }
    }

    pub fn with_definition(mut self, definition: impl Into<String>) -> Self {
        self.definition = Some(definition.into());
        self
    }

    pub fn with_relationship(mut self, predicate: &str, target: &str) -> Self {
        self.relationships.push(Relationship::new(predicate, target));
        self
    }

    pub fn with_original_id(mut self, curie: impl Into<String>) -> Self {
        self.original_id = Some(curie.into());
        self
    }

    pub fn with_alias(mut self, alias: impl Into<String>) -> Self {
        self.aliases.push(alias.into());
        self
    }

    pub fn with_extra(mut self, key: impl Into<String>, value: Value) -> Self {
        self.extras.insert(key.into(), value);
        self
    }

    pub fn validate(&self) -> Result<(), ObjectError> {
        if self.id.trim().is_empty() {
            return Err(ObjectError::EmptyId);
        }
        for (index, rel) in self.relationships.iter().enumerate() {
            if rel.predicate.trim().is_empty() || rel.target.trim().is_empty() {
                return Err(ObjectError::IncompleteRelationship {
                    id: self.id.clone(),
                    index,
                });
            }
        }
        for (key, value) in &self.extras {
            if key.is_empty() || RESERVED_FIELDS.contains(&key.as_str()) {
                return Err(ObjectError::BadExtraField(key.clone()));
            }
            if value.is_null() {
                return Err(ObjectError::NullExtra(key.clone()));
            }
        }
        Ok(())
    }

    /// Looks a field up by name, covering both dedicated slots and extras.
    pub fn field(&self, name: &str) -> Option<Value> {
        match name {
            "id" => Some(Value::String(self.id.clone())),
            "label" => Some(Value::String(self.label.clone())),
            "definition" => self.definition.clone().map(Value::String),
            "aliases" if !self.aliases.is_empty() => Some(Value::from(self.aliases.clone())),
            "relationships" if !self.relationships.is_empty() => {
                serde_json::to_value(&self.relationships).ok()
            }
            "original_id" => self.original_id.clone().map(Value::String),
            "aliases" | "relationships" => None,
            other => self.extras.get(other).cloned(),
        }
    }

    /// The object as a single JSON value in canonical field order.
    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("curated objects always serialize")
    }

    /// Names of all populated fields.
    pub fn field_names(&self) -> Vec<String> {
        let mut names = vec!["id".to_string(), "label".to_string()];
        if self.definition.is_some() {
            names.push("definition".into());
        }
        if !self.aliases.is_empty() {
            names.push("aliases".into());
        }
        if !self.relationships.is_empty() {
            names.push("relationships".into());
        }
        if self.original_id.is_some() {
            names.push("original_id".into());
        }
        names.extend(self.extras.keys().cloned());
        names
    }
}

impl fmt::Display for CuratedObject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_canonical(self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CanonicalOptions {
    pub char_budget: usize,
}

impl Default for CanonicalOptions {
    fn default() -> Self {
        Self {
            char_budget: DEFAULT_CHAR_BUDGET,
        }
    }
}

/// Canonical text of `obj` under the default 4000-character budget.
pub fn canonical_serialize(obj: &CuratedObject) -> String {
    canonical_serialize_with(obj, CanonicalOptions::default())
}

pub fn canonical_serialize_with(obj: &CuratedObject, options: CanonicalOptions) -> String {
    let full = render_canonical(obj);
    truncate_chars(full, options.char_budget)
}

fn truncate_chars(text: String, budget: usize) -> String {
    match text.char_indices().nth(budget) {
        None => text,
        Some((cut, _)) => {
            let mut out = text[..cut].to_string();
            out.push_str(TRUNCATION_MARKER);
            out
        }
    }
}

fn render_canonical(obj: &CuratedObject) -> String {
    let mut out = String::new();
    let mut entry = |key: &str, value: &Value| {
        if !out.is_empty() {
            out.push('\n');
        }
        write_entry(&mut out, key, value, 0);
    };
    entry("id", &Value::String(obj.id.clone()));
    entry("label", &Value::String(obj.label.clone()));
    if let Some(def) = &obj.definition {
        entry("definition", &Value::String(def.clone()));
    }
    if !obj.aliases.is_empty() {
        entry("aliases", &Value::from(obj.aliases.clone()));
    }
    if !obj.relationships.is_empty() {
        let rels: Vec<Value> = obj
            .relationships
            .iter()
            .map(|r| {
                let mut m = serde_json::Map::new();
                m.insert("predicate".into(), Value::String(r.predicate.clone()));
                m.insert("target".into(), Value::String(r.target.clone()));
                Value::Object(m)
            })
            .collect();
        entry("relationships", &Value::Array(rels));
    }
    if let Some(orig) = &obj.original_id {
        entry("original_id", &Value::String(orig.clone()));
    }
    for (key, value) in &obj.extras {
        entry(key, value);
    }
    out
}

/// Renders an arbitrary JSON value in the canonical block dialect.
pub fn render_tree(value: &Value) -> String {
    let mut out = String::new();
    match value {
        Value::Object(map) if !map.is_empty() => {
            for (i, (k, v)) in sorted_entries(map).into_iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                write_entry(&mut out, k, v, 0);
            }
        }
        Value::Array(items) if !items.is_empty() => {
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                out.push_str("- ");
                write_item(&mut out, item, 2);
            }
        }
        other => out.push_str(&inline_value(other).unwrap_or_default()),
    }
    out
}

fn sorted_entries(map: &serde_json::Map<String, Value>) -> Vec<(&String, &Value)> {
    let mut entries: Vec<_> = map.iter().collect();
    entries.sort_by(|a, b| a.0.cmp(b.0));
    entries
}

fn pad(out: &mut String, n: usize) {
    out.extend(std::iter::repeat_n(' ', n));
}

// Cursor sits at `indent` columns on a fresh line.
fn write_entry(out: &mut String, key: &str, value: &Value, indent: usize) {
    out.push_str(&scalar_text(key));
    out.push(':');
    match value {
        Value::Array(items) if !items.is_empty() => {
            for item in items {
                out.push('\n');
                pad(out, indent + 2);
                out.push_str("- ");
                write_item(out, item, indent + 4);
            }
        }
        Value::Object(map) if !map.is_empty() => {
            for (k, v) in sorted_entries(map) {
                out.push('\n');
                pad(out, indent + 2);
                write_entry(out, k, v, indent + 2);
            }
        }
        other => {
            out.push(' ');
            out.push_str(&inline_value(other).expect("non-container"));
        }
    }
}

// Cursor sits right after "- ", at column `col`.
fn write_item(out: &mut String, value: &Value, col: usize) {
    match value {
        Value::Object(map) if !map.is_empty() => {
            for (i, (k, v)) in sorted_entries(map).into_iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                    pad(out, col);
                }
                write_entry(out, k, v, col);
            }
        }
        Value::Array(items) if !items.is_empty() => {
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                    pad(out, col);
                }
                out.push_str("- ");
                write_item(out, item, col + 2);
            }
        }
        other => out.push_str(&inline_value(other).expect("non-container")),
    }
}

fn inline_value(value: &Value) -> Option<String> {
    Some(match value {
        Value::Null => "null".into(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => n.to_string(),
        Value::String(s) => scalar_text(s),
        Value::Array(a) if a.is_empty() => "[]".into(),
        Value::Object(m) if m.is_empty() => "{}".into(),
        _ => return None,
    })
}

/// A string as a YAML scalar: plain when unambiguous, double-quoted otherwise.
pub fn scalar_text(s: &str) -> String {
    if is_plain_safe(s) {
        s.to_string()
    } else {
        serde_json::to_string(s).expect("strings serialize")
    }
}

fn is_plain_safe(s: &str) -> bool {
    let Some(first) = s.chars().next() else {
        return false;
    };
    if first.is_whitespace() || s.ends_with(char::is_whitespace) {
        return false;
    }
    if "-?:,[]{}#&*!|>'\"%@`".contains(first) {
        return false;
    }
    if s.chars().any(|c| c.is_control()) {
        return false;
    }
    if s.contains(": ") || s.contains(" #") || s.ends_with(':') {
        return false;
    }
    // Anything YAML would resolve to a non-string (null, bools, numbers) is quoted.
    matches!(
        serde_yaml::from_str::<serde_yaml::Value>(s),
        Ok(serde_yaml::Value::String(ref parsed)) if parsed == s
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn minimal_object_renders_two_lines() {
        let obj = CuratedObject::new("X", "x");
        assert_eq!(canonical_serialize(&obj), "id: X\nlabel: x");
    }

    #[test]
    fn extras_insertion_order_is_irrelevant() {
        let a = CuratedObject::new("A", "a")
            .with_extra("zeta", json!(1))
            .with_extra("alpha", json!({"b": 2, "a": [1, 2]}));
        let mut b = CuratedObject::new("A", "a");
        let mut inner = serde_json::Map::new();
        inner.insert("a".into(), json!([1, 2]));
        inner.insert("b".into(), json!(2));
        b.extras.insert("alpha".into(), Value::Object(inner));
        b.extras.insert("zeta".into(), json!(1));
        assert_eq!(canonical_serialize(&a), canonical_serialize(&b));
    }

    #[test]
    fn field_order_and_nesting() {
        let obj = CuratedObject::new("SuburbanStormwater", "suburban stormwater")
            .with_definition("Stormwater which accumulates in a suburban ecosystem.")
            .with_relationship("LocatedIn", "SuburbanBiome")
            .with_relationship("subclassOf", "Stormwater")
            .with_original_id("ENVO:01001267")
            .with_extra("notes", json!(["one", {"k": "v", "j": []}]));
        let text = canonical_serialize(&obj);
        let expected = "id: SuburbanStormwater\n\
label: suburban stormwater\n\
definition: Stormwater which accumulates in a suburban ecosystem.\n\
relationships:\n  - predicate: LocatedIn\n    target: SuburbanBiome\n  - predicate: subclassOf\n    target: Stormwater\n\
original_id: ENVO:01001267\n\
notes:\n  - one\n  - j: []\n    k: v";
        assert_eq!(text, expected);
    }

    #[test]
    fn ambiguous_scalars_are_quoted() {
        for s in ["null", "true", "12", "1.5", "", " lead", "a: b", "- x", "#c", "multi\nline", "~"] {
            assert!(scalar_text(s).starts_with('"'), "{s:?} should be quoted");
        }
        for s in ["FOODON:00001278", "cake food product", "wątroba", "A (b), c."] {
            assert_eq!(scalar_text(s), s);
        }
    }

    #[test]
    fn truncates_at_budget_with_marker() {
        let obj = CuratedObject::new("X", "x").with_definition("d".repeat(100));
        let text = canonical_serialize_with(&obj, CanonicalOptions { char_budget: 20 });
        assert_eq!(text.chars().count(), 20 + TRUNCATION_MARKER.chars().count());
        assert!(text.ends_with(TRUNCATION_MARKER));
        let short = canonical_serialize_with(&obj, CanonicalOptions { char_budget: 10_000 });
        assert!(!short.contains("[truncated]"));
    }

    #[test]
    fn validation_rejects_bad_objects() {
        assert_eq!(CuratedObject::new("", "x").validate(), Err(ObjectError::EmptyId));
        let rel = CuratedObject::new("X", "x").with_relationship("", "Y");
        assert!(matches!(
            rel.validate(),
            Err(ObjectError::IncompleteRelationship { .. })
        ));
        let reserved = CuratedObject::new("X", "x").with_extra("label", json!("y"));
        assert!(matches!(reserved.validate(), Err(ObjectError::BadExtraField(_))));
        let null = CuratedObject::new("X", "x").with_extra("k", Value::Null);
        assert!(matches!(null.validate(), Err(ObjectError::NullExtra(_))));
    }

    #[test]
    fn json_form_keeps_canonical_field_order() {
        let obj = CuratedObject::new("B", "b")
            .with_extra("aaa", json!(1))
            .with_original_id("X:1")
            .with_definition("d");
        let line = serde_json::to_string(&obj).unwrap();
        assert_eq!(
            line,
            r#"{"id":"B","label":"b","definition":"d","original_id":"X:1","aaa":1}"#
        );
        let back: CuratedObject = serde_json::from_str(&line).unwrap();
        assert_eq!(back, obj);
    }
}
