use serde::{Deserialize, Serialize};

use super::{AgentContext, AgentError};
use crate::object::CuratedObject;
use crate::store::{mmr_rerank, MmrParams, Query, SearchHit, DEFAULT_MMR_LAMBDA};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub k: usize,
    pub diversify: bool,
    pub lambda: f64,
    /// Candidates considered by MMR; defaults to `3 * k`.
    pub pool: Option<usize>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            k: 10,
            diversify: false,
            lambda: DEFAULT_MMR_LAMBDA,
            pool: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub source: String,
    pub hits: Vec<SearchHit>,
    pub objects: Vec<CuratedObject>,
}

/// KNN over a collection, optionally re-ranked by MMR. Dynamic wrapper names
/// go through decomposition, fetch and the local cache instead; MMR is not
/// applied to those.
pub fn agent_search(ctx: &AgentContext, source: &str, query: &str, options: SearchOptions) -> Result<SearchResult, AgentError> {
    if query.trim().is_empty() {
        return Err(AgentError::InvalidInput("empty query".into()));
    }
    if options.k == 0 {
        return Err(AgentError::InvalidInput("k must be at least 1".into()));
    }
    if ctx.wrappers.is_dynamic(source) {
        let items = ctx.retrieve_dynamic(source, query, options.k)?;
        let hits = items
            .iter()
            .enumerate()
            .map(|(i, it)| SearchHit {
                object_id: it.object.id.clone(),
                distance: it.distance,
                rank: i + 1,
            })
            .collect();
        return Ok(SearchResult {
            source: source.to_string(),
            hits,
            objects: items.into_iter().map(|it| it.object).collect(),
        });
    }

    let handle = ctx.store.get(source)?;
    let coll = handle.read();
    let embedder = Some(ctx.providers.embedder.as_ref());
    let query = Query::from(query);
    let hits = if options.diversify {
        let pool = options.pool.unwrap_or(options.k.saturating_mul(3)).max(options.k);
        let params = MmrParams::new(options.lambda, pool, options.k)?;
        let (qv, candidates) = coll.knn_candidates(&query, pool, embedder)?;
        mmr_rerank(&qv, &candidates, params, coll.metric())?
    } else {
        coll.knn_search(&query, options.k, embedder)?
    };
    let objects = hits.iter().filter_map(|h| coll.get(&h.object_id).cloned()).collect();
    Ok(SearchResult {
        source: source.to_string(),
        hits,
        objects,
    })
}
