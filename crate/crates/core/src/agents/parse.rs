//! Typed parsing of model replies into [`CuratedObject`]s.

use std::sync::LazyLock;

use regex::Regex;
use serde_json::{Map, Number, Value};

use super::{mint_id, AgentError};
use crate::object::{CuratedObject, Relationship};

static FIELD_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"^(?:[A-Za-z_][A-Za-z0-9_.-]*|"[^"]+"):(?:\s|$)"#).unwrap());

/// Pulls the YAML-ish payload out of a model reply: the first fenced block if
/// there is one, otherwise the run of lines from the first `key:` line up to
/// the first unindented line that is neither a field, a list item nor blank.
pub fn extract_block(text: &str) -> Option<String> {
    let lines: Vec<&str> = text.lines().collect();
    if let Some(open) = lines.iter().position(|l| l.trim_start().starts_with("```")) {
        let body: Vec<&str> = lines[open + 1..]
            .iter()
            .take_while(|l| !l.trim_start().starts_with("```"))
            .copied()
            .collect();
        let block = body.join("\n");
        return (!block.trim().is_empty()).then_some(block);
    }
    let start = lines.iter().position(|l| FIELD_LINE.is_match(l))?;
    let mut out = Vec::new();
    for line in &lines[start..] {
        let top_level = !line.is_empty() && !line.starts_with([' ', '\t']);
        if top_level && !FIELD_LINE.is_match(line) && !line.starts_with("- ") && *line != "-" {
            break;
        }
        out.push(*line);
    }
    while out.last().is_some_and(|l| l.trim().is_empty()) {
        out.pop();
    }
    Some(out.join("\n"))
}

/// Parses YAML text into JSON-shaped values. Non-string keys are stringified
/// and tags are dropped.
pub fn yaml_to_json(value: serde_yaml::Value) -> Value {
    use serde_yaml::Value as Y;
    match value {
        Y::Null => Value::Null,
        Y::Bool(b) => Value::Bool(b),
        Y::Number(n) => {
            if let Some(i) = n.as_i64() {
                Value::Number(i.into())
            } else if let Some(u) = n.as_u64() {
                Value::Number(u.into())
            } else {
                n.as_f64()
                    .and_then(Number::from_f64)
                    .map_or_else(|| Value::String(n.to_string()), Value::Number)
            }
        }
        Y::String(s) => Value::String(s),
        Y::Sequence(items) => Value::Array(items.into_iter().map(yaml_to_json).collect()),
        Y::Mapping(map) => {
            let mut out = Map::new();
            for (k, v) in map {
                let key = match yaml_to_json(k) {
                    Value::String(s) => s,
                    other => other.to_string(),
                };
                out.insert(key, yaml_to_json(v));
            }
            Value::Object(out)
        }
        Y::Tagged(tagged) => yaml_to_json(tagged.value),
    }
}

/// Parses a block of model output into a JSON map.
pub fn parse_llm_map(text: &str) -> Result<Map<String, Value>, AgentError> {
    let block = extract_block(text).ok_or_else(|| unparseable(text, "no field lines"))?;
    let value: serde_yaml::Value =
        serde_yaml::from_str(&block).map_err(|e| unparseable(text, &e.to_string()))?;
    match yaml_to_json(value) {
        Value::Object(map) if !map.is_empty() => Ok(map),
        _ => Err(unparseable(text, "not a mapping")),
    }
}

fn unparseable(text: &str, why: &str) -> AgentError {
    let preview: String = text.chars().take(120).collect();
    AgentError::Unparseable(format!("{why}: {preview:?}"))
}

fn scalar_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn relationship_list(v: &Value) -> Result<Vec<Relationship>, AgentError> {
    let items = match v {
        Value::Array(items) => items.as_slice(),
        Value::Object(_) => std::slice::from_ref(v),
        _ => return Err(AgentError::Unparseable("relationships is not a list".into())),
    };
    let mut out = Vec::new();
    for item in items {
        let Value::Object(m) = item else {
            return Err(AgentError::Unparseable("relationship entry is not a mapping".into()));
        };
        let pred = m.get("predicate").and_then(scalar_string);
        let target = m.get("target").and_then(scalar_string);
        match (pred, target) {
            (Some(p), Some(t)) => out.push(Relationship::new(p, t)),
            // `- subclassOf: Stormwater` shorthand.
            _ if m.len() == 1 => {
                let (p, t) = m.iter().next().expect("one entry");
                let t = scalar_string(t)
                    .ok_or_else(|| AgentError::Unparseable(format!("relationship {p} has no target")))?;
                out.push(Relationship::new(p.clone(), t));
            }
            _ => return Err(AgentError::Unparseable("relationship lacks predicate or target".into())),
        }
    }
    out.retain(|r| !r.predicate.trim().is_empty() && !r.target.trim().is_empty());
    Ok(out)
}

/// Builds an object from a parsed map: reserved keys fill typed fields,
/// top-level nulls are dropped, the rest become extras. A missing id is minted
/// from the label.
pub fn object_from_map(map: Map<String, Value>) -> Result<CuratedObject, AgentError> {
    let mut obj = CuratedObject::new("", "");
    let mut id = None;
    let mut label = None;
    for (key, value) in map {
        if value.is_null() {
            continue;
        }
        match key.as_str() {
            "id" => id = scalar_string(&value),
            "label" => label = scalar_string(&value),
            "definition" => obj.definition = scalar_string(&value),
            "original_id" => obj.original_id = scalar_string(&value),
            "aliases" => {
                obj.aliases = match &value {
                    Value::Array(items) => items.iter().filter_map(scalar_string).collect(),
                    other => scalar_string(other).into_iter().collect(),
                }
            }
            "relationships" => obj.relationships = relationship_list(&value)?,
            _ => {
                obj.extras.insert(key, value);
            }
        }
    }
    let label = label.filter(|l| !l.trim().is_empty());
    let id = id.filter(|i| !i.trim().is_empty());
    obj.id = match (id, &label) {
        (Some(id), _) => id,
        (None, Some(l)) => mint_id(l)?,
        (None, None) => return Err(AgentError::NoLabelNoId),
    };
    obj.label = label.unwrap_or_default();
    Ok(obj)
}

/// Parses a model reply (optionally fenced, optionally wrapped in prose) into an object.
pub fn parse_llm_object(text: &str) -> Result<CuratedObject, AgentError> {
    object_from_map(parse_llm_map(text)?)
}
