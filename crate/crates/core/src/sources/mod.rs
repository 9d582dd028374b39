//! External knowledge: dynamic API wrappers and static ingest loaders.

mod flat;
mod ontology;
mod pubmed;
mod wikipedia;

pub use flat::{load_flat, load_flat_str, FlatFormat};
pub use ontology::{iri_to_curie, load_ontology, load_ontology_str, OntologyLoad};
pub use pubmed::{PubMedWrapper, EUTILS_BASE};
pub use wikipedia::{WikipediaWrapper, WIKIPEDIA_API};

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::http::{HttpRequest, HttpTransport, TransportError};
use crate::object::{scalar_text, CuratedObject};
use crate::prompts::{PromptLibrary, TemplateError};
use crate::providers::{CompletionModel, Embedder, ProviderError};
use crate::store::{IndexOptions, Query, SearchHit, Store, StoreError};

pub const MAX_SEARCH_TERMS: usize = 10;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("HTTP {status} from {url}")]
    Http { status: u16, url: String },
    #[error("transport: {0}")]
    Transport(#[from] TransportError),
    #[error("could not parse {what}: {message}")]
    Parse { what: String, message: String },
    #[error("row {row} has neither an id nor a label")]
    MissingField { row: usize },
    #[error("unknown wrapper {0}")]
    UnknownWrapper(String),
    #[error("wrapper {0} is registered but not implemented")]
    Unimplemented(String),
    #[error("wrapper {wrapper} does not support {capability}")]
    Unsupported { wrapper: String, capability: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

impl SourceError {
    pub(crate) fn parse(what: impl Into<String>, message: impl fmt::Display) -> Self {
        SourceError::Parse {
            what: what.into(),
            message: message.to_string(),
        }
    }
}

/// A record fetched from a dynamic source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub record_id: String,
    pub title: String,
    #[serde(default)]
    pub body: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra_ids: BTreeMap<String, String>,
    pub source_name: String,
}

impl SourceRecord {
    fn body_field(&self) -> &'static str {
        match self.source_name.as_str() {
            "pubmed" => "abstract",
            "wikipedia" => "extract",
            _ => "body",
        }
    }

    /// Short key/value rendering used in prompts and reference lists. The
    /// body is cut to `body_chars` characters.
    pub fn render(&self, body_chars: usize) -> String {
        let mut out = format!("id: {}\ntitle: {}", scalar_text(&self.record_id), scalar_text(&self.title));
        if !self.body.is_empty() {
            let mut body: String = self.body.chars().take(body_chars).collect();
            if body.len() < self.body.len() {
                body.push_str("...");
            }
            out.push_str(&format!("\n{}: {}", self.body_field(), scalar_text(&body)));
        }
        for (key, value) in &self.extra_ids {
            let shown = if key == "pmcid" { format!("PMCID:{value}") } else { value.clone() };
            out.push_str(&format!("\n{key}: {}", scalar_text(&shown)));
        }
        out
    }

    /// The cached form: id = record id, label = title, definition = body.
    pub fn to_object(&self) -> CuratedObject {
        let mut obj = CuratedObject::new(&self.record_id, &self.title);
        if !self.body.is_empty() {
            obj.definition = Some(self.body.clone());
        }
        for (k, v) in &self.extra_ids {
            obj.extras.insert(k.clone(), serde_json::Value::String(v.clone()));
        }
        obj.extras
            .insert("source".into(), serde_json::Value::String(self.source_name.clone()));
        obj
    }

    pub fn from_object(obj: &CuratedObject) -> Self {
        let extra_ids = obj
            .extras
            .iter()
            .filter(|(k, _)| k.as_str() != "source")
            .filter_map(|(k, v)| v.as_str().map(|s| (k.clone(), s.to_string())))
            .collect();
        Self {
            record_id: obj.id.clone(),
            title: obj.label.clone(),
            body: obj.definition.clone().unwrap_or_default(),
            extra_ids,
            source_name: obj
                .extras
                .get("source")
                .and_then(|v| v.as_str())
                .unwrap_or_default()
                .to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchTerms {
    pub terms: Vec<String>,
    pub origin_question: String,
}

impl SearchTerms {
    /// Terms used verbatim, without a model call.
    pub fn literal(terms: &[&str]) -> Self {
        Self {
            terms: terms.iter().map(|t| t.to_string()).collect(),
            origin_question: terms.join(" "),
        }
    }

    /// Parses a model reply: one phrase per line, list markers stripped,
    /// at most ten; falls back to the question itself.
    pub fn from_reply(question: &str, reply: &str) -> Self {
        let mut terms: Vec<String> = Vec::new();
        for line in reply.lines() {
            let t = strip_list_marker(line.trim()).trim().trim_matches('"').trim();
            if !t.is_empty() {
                terms.push(t.to_string());
            }
        }
        terms.truncate(MAX_SEARCH_TERMS);
        if terms.is_empty() {
            terms.push(question.trim().to_string());
        }
        Self {
            terms,
            origin_question: question.to_string(),
        }
    }
}

fn strip_list_marker(line: &str) -> &str {
    for marker in ["- ", "* ", "• "] {
        if let Some(rest) = line.strip_prefix(marker) {
            return rest;
        }
    }
    let digits = line.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(r) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            return r;
        }
    }
    line
}

/// Asks the model for search phrases for `question`.
pub fn decompose_query(
    llm: &dyn CompletionModel,
    prompts: &PromptLibrary,
    model_name: &str,
    question: &str,
) -> Result<SearchTerms, SourceError> {
    if question.trim().is_empty() {
        return Err(SourceError::parse("question", "empty"));
    }
    let vars = BTreeMap::from([("question", question.trim().to_string())]);
    let prompt = prompts.get("decompose")?.render(&vars, model_name)?;
    let reply = llm.complete(&prompt)?;
    Ok(SearchTerms::from_reply(question, &reply.text))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WrapperMode {
    DynamicApi,
    StaticIngest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Capability {
    Search,
    FetchById,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WrapperDescriptor {
    pub name: String,
    pub mode: WrapperMode,
    pub capabilities: Vec<Capability>,
    pub implemented: bool,
    pub description: String,
}

impl WrapperDescriptor {
    pub fn new(name: &str, mode: WrapperMode, capabilities: &[Capability], description: &str) -> Self {
        let mut caps = capabilities.to_vec();
        if mode == WrapperMode::DynamicApi && !caps.contains(&Capability::Search) {
            caps.insert(0, Capability::Search);
        }
        caps.sort();
        caps.dedup();
        Self {
            name: name.into(),
            mode,
            capabilities: caps,
            implemented: false,
            description: description.into(),
        }
    }
}

/// A dynamic source searchable by term list.
pub trait Wrapper: Send + Sync {
    fn descriptor(&self) -> WrapperDescriptor;

    fn search(&self, terms: &SearchTerms, max_records: usize) -> Result<Vec<SourceRecord>, SourceError>;

    fn fetch_by_id(&self, _ids: &[String]) -> Result<Vec<SourceRecord>, SourceError> {
        Err(SourceError::Unsupported {
            wrapper: self.descriptor().name,
            capability: "FETCH_BY_ID".into(),
        })
    }
}

/// Named wrappers, implemented or descriptor-only.
#[derive(Clone, Default)]
pub struct WrapperRegistry {
    wrappers: IndexMap<String, Arc<dyn Wrapper>>,
    descriptors: IndexMap<String, WrapperDescriptor>,
}

impl WrapperRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// PubMed and Wikipedia over `transport`, the static loaders, and
    /// descriptors for the remaining wrapper kinds.
    pub fn standard(transport: Arc<dyn HttpTransport>) -> Self {
        let mut reg = Self::new();
        reg.register(Arc::new(PubMedWrapper::from_env(transport.clone())));
        reg.register(Arc::new(WikipediaWrapper::new(transport)));
        use Capability::*;
        use WrapperMode::*;
        let mut describe = |name: &str, mode, caps: &[Capability], description: &str, implemented: bool| {
            let mut d = WrapperDescriptor::new(name, mode, caps, description);
            d.implemented = implemented;
            reg.describe(d);
        };
        describe("ontology", StaticIngest, &[], "Ontology graph JSON files", true);
        describe("flat", StaticIngest, &[], "JSON, YAML, CSV or TSV records", true);
        describe("pmc_fulltext", DynamicApi, &[FetchById], "PubMed Central full text", false);
        describe("google_drive", StaticIngest, &[], "Documents in Google Drive", false);
        describe("google_sheets", StaticIngest, &[], "Rows of a Google Sheet", false);
        describe("github_issues", DynamicApi, &[FetchById], "Issues and pull requests on GitHub", false);
        describe("jgi", DynamicApi, &[FetchById], "JGI genome portal metadata", false);
        describe("clinvar", DynamicApi, &[FetchById], "ClinVar variant records", false);
        describe("biosample", DynamicApi, &[FetchById], "NCBI BioSample records", false);
        describe("bioproject", DynamicApi, &[FetchById], "NCBI BioProject records", false);
        describe("fairsharing", DynamicApi, &[FetchById], "FAIRsharing standards and databases", false);
        describe("bioc", DynamicApi, &[FetchById], "BioC full-text documents", false);
        describe("gocam", StaticIngest, &[], "GO-CAM causal activity models", false);
        describe("hpoa", StaticIngest, &[], "HPO disease annotations", false);
        describe("nmdc", DynamicApi, &[FetchById], "NMDC biosample metadata", false);
        reg
    }

    pub fn register(&mut self, wrapper: Arc<dyn Wrapper>) {
        let mut d = wrapper.descriptor();
        d.implemented = true;
        self.descriptors.insert(d.name.clone(), d.clone());
        self.wrappers.insert(d.name, wrapper);
    }

    pub fn describe(&mut self, descriptor: WrapperDescriptor) {
        self.descriptors.insert(descriptor.name.clone(), descriptor);
    }

    pub fn descriptors(&self) -> Vec<WrapperDescriptor> {
        self.descriptors.values().cloned().collect()
    }

    pub fn is_dynamic(&self, name: &str) -> bool {
        self.wrappers.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Wrapper>, SourceError> {
        if let Some(w) = self.wrappers.get(name) {
            return Ok(w.clone());
        }
        if self.descriptors.contains_key(name) {
            return Err(SourceError::Unimplemented(name.to_string()));
        }
        Err(SourceError::UnknownWrapper(name.to_string()))
    }
}

pub fn cache_collection_name(source: &str) -> String {
    format!("cache_{source}")
}

/// Upserts `records` into the source's cache collection, indexes anything
/// new or changed, and searches the cache for `query`.
pub fn cache_and_refine(
    store: &Store,
    embedder: &dyn Embedder,
    source: &str,
    records: &[SourceRecord],
    query: &str,
    k: usize,
) -> Result<Vec<SearchHit>, SourceError> {
    let handle = store.get_or_create(&cache_collection_name(source), Default::default())?;
    {
        let mut cache = handle.write();
        if !records.is_empty() {
            let mut seen = std::collections::HashSet::new();
            let batch: Vec<CuratedObject> = records
                .iter()
                .filter(|r| seen.insert(r.record_id.clone()))
                .map(SourceRecord::to_object)
                .collect();
            cache.upsert(batch)?;
        }
        if cache.is_empty() {
            return Ok(Vec::new());
        }
        if !cache.is_fresh() {
            cache.build_index(embedder, IndexOptions::default())?;
        }
    }
    store.save(&cache_collection_name(source))?;
    let cache = handle.read();
    Ok(cache.knn_search(&Query::from(query), k, Some(embedder))?)
}

/// GET with a few retries on 429/5xx and network errors.
pub(crate) fn get_text(transport: &dyn HttpTransport, url: &str) -> Result<String, SourceError> {
    const ATTEMPTS: u32 = 3;
    let request = HttpRequest::get(url);
    let mut attempt = 1;
    loop {
        let outcome = transport.send(&request);
        let retryable = match &outcome {
            Ok(r) if r.status < 400 => return Ok(outcome.expect("ok").body),
            Ok(r) => r.status == 429 || r.status >= 500,
            Err(TransportError::Network(_)) => true,
            Err(_) => false,
        };
        if !retryable || attempt >= ATTEMPTS {
            return match outcome {
                Ok(r) => Err(SourceError::Http {
                    status: r.status,
                    url: url.to_string(),
                }),
                Err(e) => Err(e.into()),
            };
        }
        if transport.is_live() {
            std::thread::sleep(Duration::from_millis(500 * u64::from(attempt)));
        }
        attempt += 1;
    }
}
