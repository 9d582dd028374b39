use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{mint_unique_id, numbered, object_from_map, parse_llm_map, AgentContext, AgentError, PromptTrace};
use crate::object::{render_tree, CuratedObject, RESERVED_FIELDS};

pub const DEFAULT_MAX_EXAMPLES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurateOptions {
    pub generate_background: bool,
    pub instructions: Option<String>,
    pub max_examples: usize,
    /// Background supplied by the caller, placed before any generated background.
    pub background: Option<String>,
}

impl Default for CurateOptions {
    fn default() -> Self {
        Self {
            generate_background: false,
            instructions: None,
            max_examples: DEFAULT_MAX_EXAMPLES,
            background: None,
        }
    }
}

/// A proposed object. Nothing is written to the collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurateOutcome {
    pub object: CuratedObject,
    pub exemplar_ids: Vec<String>,
    pub warnings: Vec<String>,
    pub trace: PromptTrace,
}

/// Block rendering of a partial object with reserved fields first.
pub(crate) fn render_partial(map: &Map<String, Value>) -> String {
    let mut keys: Vec<&String> = map.keys().collect();
    keys.sort_by_key(|k| (RESERVED_FIELDS.iter().position(|r| r == k).unwrap_or(RESERVED_FIELDS.len()), k.to_string()));
    keys.into_iter()
        .filter(|k| !map[*k].is_null())
        .map(|k| {
            let mut one = Map::new();
            one.insert(k.clone(), map[k].clone());
            render_tree(&Value::Object(one))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Turns a parsed reply into an object, minting an id unique within
/// `collection` when the reply has none.
pub(crate) fn finish_object(ctx: &AgentContext, collection: &str, mut map: Map<String, Value>, seed: Option<&Map<String, Value>>) -> Result<CuratedObject, AgentError> {
    if let Some(seed) = seed {
        for key in ["label", "id"] {
            if map.get(key).is_none_or(Value::is_null) {
                if let Some(v) = seed.get(key).filter(|v| !v.is_null()) {
                    map.insert(key.into(), v.clone());
                }
            }
        }
    }
    let has_id = map.get("id").and_then(Value::as_str).is_some_and(|s| !s.trim().is_empty());
    if !has_id {
        if let Some(label) = map.get("label").and_then(Value::as_str).filter(|l| !l.trim().is_empty()) {
            let id = match ctx.store.get(collection) {
                Ok(handle) => {
                    let coll = handle.read();
                    mint_unique_id(label, |c| coll.contains(c))?
                }
                Err(_) => super::mint_id(label)?,
            };
            map.insert("id".into(), Value::String(id));
        }
    }
    object_from_map(map)
}

/// Completes `seed` into a full object shaped like its nearest neighbours in `collection`.
pub fn agent_curate(ctx: &AgentContext, collection: &str, seed: &Map<String, Value>, options: CurateOptions) -> Result<CurateOutcome, AgentError> {
    let seed_is_empty = seed.values().all(|v| match v {
        Value::Null => true,
        Value::String(s) => s.trim().is_empty(),
        Value::Array(a) => a.is_empty(),
        Value::Object(m) => m.is_empty(),
        _ => false,
    });
    if seed_is_empty {
        return Err(AgentError::InvalidInput("seed has no non-empty field".into()));
    }
    if options.max_examples == 0 {
        return Err(AgentError::InvalidInput("max_examples must be at least 1".into()));
    }
    let seed_text = render_partial(seed);
    let mut warnings = Vec::new();
    let exemplars = ctx.retrieve(collection, &seed_text, options.max_examples)?;
    if exemplars.is_empty() {
        warnings.push(format!("collection {collection} is empty; no exemplars used"));
    }

    let mut trace = PromptTrace {
        exemplar_ids: exemplars.iter().map(|e| e.object.id.clone()).collect(),
        ..Default::default()
    };
    let mut background: Vec<String> = options.background.iter().filter(|b| !b.trim().is_empty()).cloned().collect();
    if options.generate_background {
        let mut bg_trace = PromptTrace::default();
        let prompt = ctx.render("background", &BTreeMap::from([("seed", seed_text.clone())]), &mut bg_trace)?;
        let reply = ctx.complete(&prompt)?;
        trace.prompts.extend(bg_trace.prompts);
        if !reply.text.trim().is_empty() {
            background.push(reply.text.trim().to_string());
        }
    }
    trace.background = Some(background.join("\n\n")).filter(|b| !b.is_empty());

    let mut vars = BTreeMap::from([
        ("collection", collection.to_string()),
        ("seed", seed_text),
        ("exemplars", numbered(exemplars.iter().map(|e| e.rendering.clone()))),
        ("background", trace.background.clone().unwrap_or_default()),
    ]);
    if let Some(i) = options.instructions.as_ref().filter(|i| !i.trim().is_empty()) {
        vars.insert("instructions", i.trim().to_string());
    }
    let prompt = ctx.render("curate", &vars, &mut trace)?;
    let reply = ctx.complete(&prompt)?;
    if !reply.finished {
        warnings.push("model output was cut off".into());
    }
    let object = finish_object(ctx, collection, parse_llm_map(&reply.text)?, Some(seed))?;
    Ok(CurateOutcome {
        object,
        exemplar_ids: trace.exemplar_ids.clone(),
        warnings,
        trace,
    })
}
