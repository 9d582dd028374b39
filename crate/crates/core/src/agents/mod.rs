//! The curation agents. Each one retrieves context from the store or a
//! dynamic wrapper, renders a versioned prompt, calls the completion model and
//! parses the reply into typed output. Agents never write to the collection
//! they read from; the only writes are to wrapper cache collections.

mod bootstrap;
mod chat;
mod citeseek;
mod curate;
mod extract;
mod matcher;
mod mint;
mod parse;
mod search;

pub use bootstrap::{
    agent_bootstrap_data, agent_bootstrap_schema, repair_schema, BootstrapConfig, BootstrapData,
    BootstrapInstance, BootstrapSchema,
};
pub use chat::{agent_chat, extract_markers, ChatOptions, ChatResponse, Reference, DEFAULT_CHAT_K};
pub use citeseek::{agent_citeseek, Claim, EvidenceCategory, EvidenceReport, Verdict, DEFAULT_CITESEEK_K};
pub use curate::{agent_curate, CurateOptions, CurateOutcome, DEFAULT_MAX_EXAMPLES};
pub use extract::{agent_extract, ExtractOptions, ExtractOutcome, ExtractStrategy, BASIC_EXEMPLAR_CAP, RECURSION_DEPTH};
pub use matcher::{agent_match, MatchResult, DEFAULT_MATCH_N};
pub use mint::{mint_id, mint_unique_id};
pub use parse::{extract_block, object_from_map, parse_llm_map, parse_llm_object, yaml_to_json};
pub use search::{agent_search, SearchOptions, SearchResult};

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::object::{canonical_serialize_with, CuratedObject};
use crate::prompts::{PromptLibrary, TemplateError};
use crate::providers::{CompletionResult, ProviderError, ProviderSet, PromptSpec};
use crate::schema::SchemaIssue;
use crate::sources::{cache_and_refine, cache_collection_name, decompose_query, SourceError, SourceRecord, WrapperRegistry};
use crate::store::{Query, Store, StoreError};

/// Characters of a record body shown in reference renderings.
pub const REFERENCE_BODY_CHARS: usize = 300;
/// Records fetched from a dynamic wrapper per request.
pub const DEFAULT_FETCH_LIMIT: usize = 10;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("label {0:?} has no usable characters for an id")]
    EmptyAfterNormalization(String),
    #[error("could not parse model output: {0}")]
    Unparseable(String),
    #[error("parsed object has neither a label nor an id")]
    NoLabelNoId,
    #[error("nothing was retrieved to answer from")]
    EmptyContext,
    #[error("collection {0:?} is empty")]
    EmptyCollection(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("schema is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidSchema(Vec<SchemaIssue>),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Source(SourceError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

impl From<SourceError> for AgentError {
    fn from(e: SourceError) -> Self {
        match e {
            SourceError::Provider(p) => AgentError::Provider(p),
            SourceError::Store(s) => AgentError::Store(s),
            SourceError::Template(t) => AgentError::Template(t),
            other => AgentError::Source(other),
        }
    }
}

/// What an agent sent to the model, kept for inspection and tests.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PromptTrace {
    pub template: String,
    pub version: u32,
    pub exemplar_ids: Vec<String>,
    pub context_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<String>,
    pub prompts: Vec<PromptSpec>,
}

/// One retrieved context item with the text shown to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextItem {
    pub source: String,
    pub object: CuratedObject,
    pub distance: f64,
    pub rendering: String,
}

/// Shared handles every agent runs against.
#[derive(Clone)]
pub struct AgentContext {
    pub store: Arc<Store>,
    pub providers: ProviderSet,
    pub wrappers: Arc<WrapperRegistry>,
    pub prompts: Arc<PromptLibrary>,
    pub model_name: String,
    pub fetch_limit: usize,
}

impl AgentContext {
    pub fn new(store: Arc<Store>, providers: ProviderSet, wrappers: Arc<WrapperRegistry>, prompts: Arc<PromptLibrary>) -> Self {
        Self {
            store,
            providers,
            wrappers,
            prompts,
            model_name: String::new(),
            fetch_limit: DEFAULT_FETCH_LIMIT,
        }
    }

    pub fn with_model_name(mut self, name: impl Into<String>) -> Self {
        self.model_name = name.into();
        self
    }

    pub(crate) fn render(&self, template: &str, vars: &BTreeMap<&str, String>, trace: &mut PromptTrace) -> Result<PromptSpec, AgentError> {
        let t = self.prompts.get(template)?;
        if trace.template.is_empty() {
            trace.template = t.name.clone();
            trace.version = t.version;
        }
        let spec = t.render(vars, &self.model_name)?;
        trace.prompts.push(spec.clone());
        Ok(spec)
    }

    pub(crate) fn complete(&self, prompt: &PromptSpec) -> Result<CompletionResult, AgentError> {
        Ok(self.providers.completions.complete(prompt)?)
    }

    /// Top `k` items from a collection, or from a dynamic wrapper via
    /// query decomposition, fetch and the local cache.
    pub fn retrieve(&self, source: &str, query: &str, k: usize) -> Result<Vec<ContextItem>, AgentError> {
        if self.wrappers.is_dynamic(source) {
            return self.retrieve_dynamic(source, query, k);
        }
        let handle = self.store.get(source)?;
        let coll = handle.read();
        if coll.is_empty() {
            return Ok(Vec::new());
        }
        let hits = coll.knn_search(&Query::from(query), k, Some(self.providers.embedder.as_ref()))?;
        let options = coll.canonical_options();
        Ok(hits
            .into_iter()
            .filter_map(|h| {
                let obj = coll.get(&h.object_id)?.clone();
                Some(ContextItem {
                    source: source.to_string(),
                    rendering: canonical_serialize_with(&obj, options),
                    object: obj,
                    distance: h.distance,
                })
            })
            .collect())
    }

    /// Fetches fresh records for `query`, caches them, and ranks only those
    /// records against the query.
    pub fn retrieve_dynamic(&self, wrapper: &str, query: &str, k: usize) -> Result<Vec<ContextItem>, AgentError> {
        let w = self.wrappers.get(wrapper)?;
        let terms = decompose_query(self.providers.completions.as_ref(), &self.prompts, &self.model_name, query)?;
        let records = w.search(&terms, self.fetch_limit)?;
        if records.is_empty() {
            return Ok(Vec::new());
        }
        let cache_name = cache_collection_name(wrapper);
        let hits = cache_and_refine(&self.store, self.providers.embedder.as_ref(), wrapper, &records, query, usize::MAX)?;
        let fetched: std::collections::HashSet<&str> = records.iter().map(|r| r.record_id.as_str()).collect();
        let handle = self.store.get(&cache_name)?;
        let cache = handle.read();
        Ok(hits
            .into_iter()
            .filter(|h| fetched.contains(h.object_id.as_str()))
            .take(k)
            .filter_map(|h| {
                let obj = cache.get(&h.object_id)?.clone();
                Some(ContextItem {
                    source: wrapper.to_string(),
                    rendering: SourceRecord::from_object(&obj).render(REFERENCE_BODY_CHARS),
                    object: obj,
                    distance: h.distance,
                })
            })
            .collect())
    }
}

/// Numbered context block: `[1]` followed by the rendering, blank line between items.
pub(crate) fn numbered(renderings: impl IntoIterator<Item = String>) -> String {
    renderings
        .into_iter()
        .enumerate()
        .map(|(i, r)| format!("[{}]\n{r}", i + 1))
        .collect::<Vec<_>>()
        .join("\n\n")
}
