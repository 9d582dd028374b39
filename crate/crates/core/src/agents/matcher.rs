use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{numbered, parse_llm_map, AgentContext, AgentError, PromptTrace};
use crate::object::{scalar_text, CuratedObject};
use crate::store::{Query, SearchHit};

pub const DEFAULT_MATCH_N: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub candidates: Vec<SearchHit>,
    pub chosen: String,
    pub rationale: String,
    /// The reply named no candidate, so the top-ranked one was taken.
    pub fallback: bool,
    pub trace: PromptTrace,
}

fn candidate_text(obj: &CuratedObject) -> String {
    let mut out = format!("id: {}\nlabel: {}", scalar_text(&obj.id), scalar_text(&obj.label));
    if let Some(d) = &obj.definition {
        out.push_str(&format!("\ndefinition: {}", scalar_text(d)));
    }
    if let Some(o) = &obj.original_id {
        out.push_str(&format!("\noriginal_id: {}", scalar_text(o)));
    }
    out
}

/// Finds the candidate a reply names, by id, original id or label.
fn pick(named: &str, objects: &[CuratedObject]) -> Option<usize> {
    let named = named.trim().trim_matches(|c| c == '"' || c == '\'' || c == '`').trim();
    if named.is_empty() {
        return None;
    }
    objects
        .iter()
        .position(|o| o.id == named)
        .or_else(|| objects.iter().position(|o| o.original_id.as_deref() == Some(named)))
        .or_else(|| objects.iter().position(|o| o.label.eq_ignore_ascii_case(named)))
}

/// Top-`n` vector candidates for `query`, then the model picks one.
pub fn agent_match(ctx: &AgentContext, collection: &str, query: &str, n: usize) -> Result<MatchResult, AgentError> {
    if query.trim().is_empty() {
        return Err(AgentError::InvalidInput("empty query".into()));
    }
    if n == 0 {
        return Err(AgentError::InvalidInput("n must be at least 1".into()));
    }
    let handle = ctx.store.get(collection)?;
    let (candidates, objects) = {
        let coll = handle.read();
        if coll.is_empty() {
            return Err(AgentError::EmptyCollection(collection.to_string()));
        }
        let hits = coll.knn_search(&Query::from(query.trim()), n, Some(ctx.providers.embedder.as_ref()))?;
        let objects: Vec<CuratedObject> = hits.iter().filter_map(|h| coll.get(&h.object_id).cloned()).collect();
        (hits, objects)
    };

    let mut trace = PromptTrace {
        context_ids: objects.iter().map(|o| o.id.clone()).collect(),
        ..Default::default()
    };
    let vars = BTreeMap::from([
        ("query", query.trim().to_string()),
        ("candidates", numbered(objects.iter().map(candidate_text))),
    ]);
    let prompt = ctx.render("match", &vars, &mut trace)?;
    let reply = ctx.complete(&prompt)?;

    let parsed = parse_llm_map(&reply.text).ok();
    let named = parsed.as_ref().and_then(|m| match m.get("chosen") {
        Some(Value::String(s)) => Some(s.clone()),
        Some(Value::Number(n)) => Some(n.to_string()),
        _ => None,
    });
    // A bare candidate number also counts.
    let index = named.as_deref().and_then(|s| {
        pick(s, &objects).or_else(|| {
            s.trim()
                .trim_matches(|c| c == '[' || c == ']')
                .parse::<usize>()
                .ok()
                .filter(|i| (1..=objects.len()).contains(i))
                .map(|i| i - 1)
        })
    });
    let rationale = match parsed.as_ref().and_then(|m| m.get("rationale")) {
        Some(Value::String(s)) => s.trim().to_string(),
        _ => reply.text.trim().to_string(),
    };
    let (chosen, fallback) = match index {
        Some(i) => (objects[i].id.clone(), false),
        None => (candidates[0].object_id.clone(), true),
    };
    Ok(MatchResult {
        candidates,
        chosen,
        rationale,
        fallback,
        trace,
    })
}
