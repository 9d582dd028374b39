//! The application service shared by the command line and the HTTP API.
//!
//! Every operation takes a typed request and returns a serialisable payload,
//! so `--json` output and HTTP response bodies are the same documents.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use curation_core::agents::{
    self, AgentContext, AgentError, BootstrapConfig, ChatOptions, Claim, CurateOptions, ExtractOptions,
    ExtractStrategy, SearchOptions, DEFAULT_CHAT_K, DEFAULT_CITESEEK_K, DEFAULT_MATCH_N, DEFAULT_MAX_EXAMPLES,
};
use curation_core::http::{HttpTransport, LiveTransport, RecordingTransport, ReplayTransport};
use curation_core::object::canonical_serialize_with;
use curation_core::prompts::PromptLibrary;
use curation_core::providers::ProviderSet;
use curation_core::schema::SchemaSpec;
use curation_core::sources::{
    cache_collection_name, load_flat, load_ontology, FlatFormat, SourceError, WrapperDescriptor, WrapperRegistry,
};
use curation_core::store::{
    export_bundle, import_bundle, project_2d, IndexMetadata, IndexOptions, Projection, StoreError,
};
use curation_core::{CuratedObject, DistanceMetric, Store};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::cart::{cart_path, load_cart, save_cart, Cart, CartItem, CartPurpose};
use crate::config::Settings;

/// How long a write waits for a collection's writer lock before giving up.
pub const WRITE_WAIT: Duration = Duration::from_millis(500);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Validation,
    NotFound,
    Conflict,
    Upstream,
    Busy,
    Internal,
}

/// An error with a stable machine code. Serialises as `{error_code, message, detail}`.
#[derive(Debug, Clone, Serialize)]
pub struct AppError {
    #[serde(skip)]
    pub kind: ErrorKind,
    pub error_code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.error_code, self.message)
    }
}

impl std::error::Error for AppError {}

impl AppError {
    pub fn new(kind: ErrorKind, code: &str, message: impl Into<String>) -> Self {
        Self {
            kind,
            error_code: code.into(),
            message: message.into(),
            detail: None,
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Validation, "invalid_request", message)
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    pub fn status(&self) -> u16 {
        match self.kind {
            ErrorKind::Validation => 400,
            ErrorKind::NotFound => 404,
            ErrorKind::Conflict => 409,
            ErrorKind::Upstream => 502,
            ErrorKind::Busy => 503,
            ErrorKind::Internal => 500,
        }
    }
}

impl From<StoreError> for AppError {
    fn from(e: StoreError) -> Self {
        use ErrorKind::*;
        let (kind, code) = match &e {
            StoreError::CollectionNotFound(_) => (NotFound, "unknown_collection"),
            StoreError::ObjectNotFound(_) => (NotFound, "unknown_object"),
            StoreError::CollectionExists(_) => (Conflict, "collection_exists"),
            StoreError::ObjectExists(_) | StoreError::DuplicateInBatch(_) => (Conflict, "id_conflict"),
            StoreError::Busy(_) => (Busy, "store_busy"),
            StoreError::Embedder(_) => (Upstream, "embedder_failure"),
            StoreError::StaleIndex => (Validation, "stale_index"),
            StoreError::EmptyCollection => (Validation, "empty_collection"),
            StoreError::Io { .. } | StoreError::Serde(_) => (Internal, "storage_failure"),
            _ => (Validation, "invalid_request"),
        };
        AppError::new(kind, code, e.to_string())
    }
}

impl From<SourceError> for AppError {
    fn from(e: SourceError) -> Self {
        AppError::from(AgentError::from(e))
    }
}

impl From<AgentError> for AppError {
    fn from(e: AgentError) -> Self {
        use ErrorKind::*;
        let (kind, code) = match &e {
            AgentError::Store(_) => {
                let AgentError::Store(s) = e else { unreachable!() };
                return s.into();
            }
            AgentError::Provider(_) => (Upstream, "provider_failure"),
            AgentError::Source(s) => match s {
                SourceError::UnknownWrapper(_) => (NotFound, "unknown_wrapper"),
                SourceError::Unimplemented(_) | SourceError::Unsupported { .. } => (Validation, "unsupported_wrapper"),
                SourceError::MissingField { .. } | SourceError::Io { .. } => (Validation, "invalid_input_file"),
                _ => (Upstream, "wrapper_failure"),
            },
            AgentError::Unparseable(_) | AgentError::NoLabelNoId => (Upstream, "unparseable_model_output"),
            AgentError::InvalidSchema(_) => (Upstream, "invalid_generated_schema"),
            AgentError::Template(_) => (Internal, "template_failure"),
            AgentError::EmptyContext => (Validation, "empty_context"),
            AgentError::EmptyCollection(_) => (Validation, "empty_collection"),
            AgentError::Precondition(_) => (Validation, "precondition_failed"),
            AgentError::InvalidInput(_) | AgentError::EmptyAfterNormalization(_) => (Validation, "invalid_request"),
        };
        let detail = match &e {
            AgentError::InvalidSchema(issues) => Some(Value::Array(
                issues.iter().map(|i| Value::String(i.to_string())).collect(),
            )),
            _ => None,
        };
        let mut err = AppError::new(kind, code, e.to_string());
        err.detail = detail;
        err
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionInfo {
    pub name: String,
    pub object_count: usize,
    pub metric: DistanceMetric,
    /// True when every object has a current vector.
    pub indexed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding_model_name: Option<String>,
    pub content_digest: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateCollectionRequest {
    pub name: String,
    #[serde(default)]
    pub metric: DistanceMetric,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InsertRequest {
    pub object: CuratedObject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertResponse {
    pub collection: String,
    pub object_id: String,
    pub object_count: usize,
    pub content_digest: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IngestKind {
    Ontology,
    Flat,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestRequest {
    pub kind: IngestKind,
    pub path: PathBuf,
    #[serde(default)]
    pub format: Option<FlatFormat>,
    #[serde(default = "default_id_field")]
    pub id_field: String,
    #[serde(default = "default_label_field")]
    pub label_field: String,
    #[serde(default)]
    pub metric: Option<DistanceMetric>,
    /// Embed the new objects right away.
    #[serde(default = "default_true")]
    pub index: bool,
}

fn default_id_field() -> String {
    "id".into()
}
fn default_label_field() -> String {
    "label".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub collection: String,
    pub inserted: usize,
    pub updated: usize,
    pub skipped_unlabeled: usize,
    pub object_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<IndexMetadata>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRequest {
    #[serde(alias = "source")]
    pub collection: String,
    pub query: String,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub diversify: bool,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub pool: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatRequest {
    #[serde(alias = "collections")]
    pub sources: Vec<String>,
    pub question: String,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_true")]
    pub use_cart: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurateRequest {
    pub collection: String,
    /// Partial object. When absent, the first REFINE cart item from this
    /// collection is used.
    #[serde(default)]
    pub seed: Option<Map<String, Value>>,
    #[serde(default)]
    pub max_examples: Option<usize>,
    #[serde(default)]
    pub generate_background: bool,
    #[serde(default)]
    pub instructions: Option<String>,
    #[serde(default = "default_true")]
    pub use_cart: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractRequest {
    pub collection: String,
    pub text: String,
    #[serde(default)]
    pub strategy: Option<ExtractStrategy>,
    #[serde(default)]
    pub instructions: Option<String>,
    #[serde(default)]
    pub background_source: Option<String>,
    #[serde(default = "default_true")]
    pub use_cart: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CiteSeekRequest {
    pub source: String,
    pub claim: Claim,
    #[serde(default)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchRequest {
    pub collection: String,
    pub query: String,
    #[serde(default)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum BootstrapRequest {
    Schema {
        config: BootstrapConfig,
    },
    Data {
        schema: SchemaSpec,
        #[serde(default = "default_bootstrap_count")]
        count: usize,
    },
}

fn default_bootstrap_count() -> usize {
    3
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum BootstrapResponse {
    Schema(agents::BootstrapSchema),
    Data(agents::BootstrapData),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CartRequest {
    #[serde(default = "default_cart_action")]
    pub action: CartAction,
    pub object_id: String,
    pub source: String,
    #[serde(default = "default_purpose")]
    pub purpose: CartPurpose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CartAction {
    Add,
    Remove,
}

fn default_cart_action() -> CartAction {
    CartAction::Add
}
fn default_purpose() -> CartPurpose {
    CartPurpose::Background
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleExportRequest {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleImportRequest {
    pub dir: PathBuf,
    /// Store under this name instead of the bundle's own.
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleReport {
    pub collection: String,
    pub dir: PathBuf,
    pub object_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deleted {
    pub deleted: String,
}

/// The agent names accepted by [`App::call_agent`].
pub const AGENTS: [&str; 7] = ["search", "chat", "curate", "extract", "citeseek", "match", "bootstrap"];

pub struct App {
    settings: Settings,
    ctx: AgentContext,
    cart: Mutex<Cart>,
    cart_file: Option<PathBuf>,
}

fn parse_body<T: serde::de::DeserializeOwned>(body: Value) -> Result<T, AppError> {
    serde_json::from_value(body).map_err(|e| AppError::validation(e.to_string()))
}

fn to_json<T: Serialize>(value: &T) -> Result<Value, AppError> {
    serde_json::to_value(value).map_err(|e| AppError::new(ErrorKind::Internal, "serialization_failure", e.to_string()))
}

impl App {
    /// Opens the store at `settings.db_path` and builds providers and wrappers
    /// from the settings.
    pub fn open(settings: Settings) -> Result<Self, AppError> {
        let store = Arc::new(Store::open(&settings.db_path)?);
        let transport: Arc<dyn HttpTransport> = match (&settings.sources.replay_dir, &settings.sources.record_dir) {
            (Some(dir), _) => Arc::new(ReplayTransport::from_dir(dir).map_err(|e| {
                AppError::new(ErrorKind::Internal, "config_error", e.to_string())
            })?),
            (None, Some(dir)) => Arc::new(RecordingTransport::new(LiveTransport::default(), dir.clone())),
            (None, None) => Arc::new(LiveTransport::default()),
        };
        let providers = settings
            .provider
            .build()
            .map_err(|e| AppError::new(ErrorKind::Internal, "config_error", e.to_string()))?;
        let mut app = Self::with_parts(settings, store, providers, transport);
        app.cart_file = Some(cart_path(&app.settings.db_path));
        let cart = load_cart(app.cart_file.as_deref().expect("set"))
            .map_err(|e| AppError::new(ErrorKind::Internal, "storage_failure", e.to_string()))?;
        *app.cart.lock() = cart;
        Ok(app)
    }

    /// Assembles an app from ready-made parts. The cart lives in memory only.
    pub fn with_parts(settings: Settings, store: Arc<Store>, providers: ProviderSet, transport: Arc<dyn HttpTransport>) -> Self {
        Self::with_registry(settings, store, providers, Arc::new(WrapperRegistry::standard(transport)))
    }

    /// Like [`App::with_parts`] with a caller-built wrapper registry.
    pub fn with_registry(settings: Settings, store: Arc<Store>, providers: ProviderSet, wrappers: Arc<WrapperRegistry>) -> Self {
        let ctx = AgentContext::new(store, providers, wrappers, Arc::new(PromptLibrary::builtin()))
            .with_model_name(settings.model_name.clone());
        Self {
            settings,
            ctx,
            cart: Mutex::new(Cart::default()),
            cart_file: None,
        }
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn context(&self) -> &AgentContext {
        &self.ctx
    }

    pub fn store(&self) -> &Store {
        &self.ctx.store
    }

    fn collection_info(&self, name: &str) -> Result<CollectionInfo, AppError> {
        let handle = self.store().get(name)?;
        let coll = handle.read();
        Ok(CollectionInfo {
            name: name.to_string(),
            object_count: coll.len(),
            metric: coll.metric(),
            indexed: !coll.is_empty() && coll.is_fresh(),
            embedding_model_name: coll.metadata().map(|m| m.embedding_model_name.clone()),
            content_digest: coll.content_digest(),
        })
    }

    pub fn list_collections(&self) -> Result<Vec<CollectionInfo>, AppError> {
        self.store().names().iter().map(|n| self.collection_info(n)).collect()
    }

    pub fn create_collection(&self, req: CreateCollectionRequest) -> Result<CollectionInfo, AppError> {
        self.store().create(&req.name, req.metric)?;
        self.collection_info(&req.name)
    }

    pub fn delete_collection(&self, name: &str) -> Result<Deleted, AppError> {
        self.store().delete(name)?;
        Ok(Deleted { deleted: name.to_string() })
    }

    pub fn list_objects(&self, name: &str) -> Result<Vec<CuratedObject>, AppError> {
        let handle = self.store().get(name)?;
        let coll = handle.read();
        Ok(coll.objects().cloned().collect())
    }

    /// The only path by which a proposed object enters a collection. An
    /// indexed collection stays indexed.
    pub fn insert_object(&self, name: &str, req: InsertRequest) -> Result<InsertResponse, AppError> {
        let handle = self.store().get(name)?;
        let response = {
            let mut coll = handle
                .try_write_for(WRITE_WAIT)
                .ok_or_else(|| AppError::from(StoreError::Busy(name.to_string())))?;
            let id = req.object.id.clone();
            let was_indexed = coll.index().is_some();
            coll.insert(req.object)?;
            if was_indexed {
                coll.build_index(self.ctx.providers.embedder.as_ref(), IndexOptions::default())?;
            }
            InsertResponse {
                collection: name.to_string(),
                object_id: id,
                object_count: coll.len(),
                content_digest: coll.content_digest(),
            }
        };
        self.store().save(name)?;
        Ok(response)
    }

    pub fn ingest(&self, name: &str, req: IngestRequest) -> Result<IngestReport, AppError> {
        let (objects, skipped) = match req.kind {
            IngestKind::Ontology => {
                let load = load_ontology(&req.path)?;
                (load.objects, load.skipped_unlabeled)
            }
            IngestKind::Flat => {
                let format = req
                    .format
                    .or_else(|| FlatFormat::from_extension(&req.path))
                    .ok_or_else(|| AppError::validation(format!("cannot tell the format of {}", req.path.display())))?;
                (load_flat(&req.path, format, &req.id_field, &req.label_field)?, 0)
            }
        };
        let handle = self.store().get_or_create(name, req.metric.unwrap_or_default())?;
        let report = {
            let mut coll = handle
                .try_write_for(WRITE_WAIT)
                .ok_or_else(|| AppError::from(StoreError::Busy(name.to_string())))?;
            let upsert = coll.upsert(objects)?;
            let index = if req.index && !coll.is_empty() {
                Some(coll.build_index(self.ctx.providers.embedder.as_ref(), IndexOptions::default())?)
            } else {
                None
            };
            IngestReport {
                collection: name.to_string(),
                inserted: upsert.inserted,
                updated: upsert.updated,
                skipped_unlabeled: skipped,
                object_count: coll.len(),
                index,
            }
        };
        self.store().save(name)?;
        Ok(report)
    }

    pub fn build_index(&self, name: &str) -> Result<IndexMetadata, AppError> {
        let handle = self.store().get(name)?;
        let meta = {
            let mut coll = handle
                .try_write_for(WRITE_WAIT)
                .ok_or_else(|| AppError::from(StoreError::Busy(name.to_string())))?;
            coll.build_index(self.ctx.providers.embedder.as_ref(), IndexOptions::default())?
        };
        self.store().save(name)?;
        Ok(meta)
    }

    pub fn projection(&self, name: &str) -> Result<Projection, AppError> {
        let handle = self.store().get(name)?;
        let coll = handle.read();
        Ok(project_2d(&coll)?)
    }

    pub fn wrappers(&self) -> Vec<WrapperDescriptor> {
        self.ctx.wrappers.descriptors()
    }

    pub fn config(&self) -> Settings {
        self.settings.clone()
    }

    fn require_source(&self, source: &str) -> Result<(), AppError> {
        if self.ctx.wrappers.is_dynamic(source) || self.store().exists(source) {
            Ok(())
        } else {
            self.ctx.wrappers.get(source)?;
            Err(StoreError::CollectionNotFound(source.to_string()).into())
        }
    }

    pub fn search(&self, req: SearchRequest) -> Result<agents::SearchResult, AppError> {
        self.require_source(&req.collection)?;
        let defaults = SearchOptions::default();
        let options = SearchOptions {
            k: req.k.unwrap_or(defaults.k),
            diversify: req.diversify,
            lambda: req.lambda.unwrap_or(defaults.lambda),
            pool: req.pool,
        };
        Ok(agents::agent_search(&self.ctx, &req.collection, &req.query, options)?)
    }

    pub fn chat(&self, req: ChatRequest) -> Result<agents::ChatResponse, AppError> {
        for s in &req.sources {
            self.require_source(s)?;
        }
        let options = ChatOptions {
            k: req.k.unwrap_or(DEFAULT_CHAT_K),
            background: if req.use_cart { self.cart_background()? } else { None },
        };
        Ok(agents::agent_chat(&self.ctx, &req.sources, &req.question, options)?)
    }

    pub fn curate(&self, req: CurateRequest) -> Result<agents::CurateOutcome, AppError> {
        self.require_source(&req.collection)?;
        let seed = match req.seed {
            Some(seed) => seed,
            None => self.refine_seed(&req.collection)?,
        };
        let options = CurateOptions {
            generate_background: req.generate_background,
            instructions: req.instructions,
            max_examples: req.max_examples.unwrap_or(DEFAULT_MAX_EXAMPLES),
            background: if req.use_cart { self.cart_background()? } else { None },
        };
        Ok(agents::agent_curate(&self.ctx, &req.collection, &seed, options)?)
    }

    pub fn extract(&self, req: ExtractRequest) -> Result<agents::ExtractOutcome, AppError> {
        self.require_source(&req.collection)?;
        let background_source = req.background_source.or_else(|| self.settings.background_source.clone());
        if let Some(s) = &background_source {
            self.require_source(s)?;
        }
        let options = ExtractOptions {
            strategy: req.strategy.unwrap_or(self.settings.extraction_strategy),
            instructions: req.instructions,
            background_source,
            background: if req.use_cart { self.cart_background()? } else { None },
        };
        Ok(agents::agent_extract(&self.ctx, &req.collection, &req.text, options)?)
    }

    pub fn citeseek(&self, req: CiteSeekRequest) -> Result<agents::EvidenceReport, AppError> {
        self.require_source(&req.source)?;
        Ok(agents::agent_citeseek(&self.ctx, &req.claim, &req.source, req.k.unwrap_or(DEFAULT_CITESEEK_K))?)
    }

    pub fn match_term(&self, req: MatchRequest) -> Result<agents::MatchResult, AppError> {
        self.require_source(&req.collection)?;
        Ok(agents::agent_match(&self.ctx, &req.collection, &req.query, req.n.unwrap_or(DEFAULT_MATCH_N))?)
    }

    pub fn bootstrap(&self, req: BootstrapRequest) -> Result<BootstrapResponse, AppError> {
        Ok(match req {
            BootstrapRequest::Schema { config } => BootstrapResponse::Schema(agents::agent_bootstrap_schema(&self.ctx, &config)?),
            BootstrapRequest::Data { schema, count } => {
                BootstrapResponse::Data(agents::agent_bootstrap_data(&self.ctx, &schema, count)?)
            }
        })
    }

    /// Runs the named agent on a JSON request body.
    pub fn call_agent(&self, agent: &str, body: Value) -> Result<Value, AppError> {
        match agent {
            "search" => to_json(&self.search(parse_body(body)?)?),
            "chat" => to_json(&self.chat(parse_body(body)?)?),
            "curate" => to_json(&self.curate(parse_body(body)?)?),
            "extract" => to_json(&self.extract(parse_body(body)?)?),
            "citeseek" => to_json(&self.citeseek(parse_body(body)?)?),
            "match" => to_json(&self.match_term(parse_body(body)?)?),
            "bootstrap" => to_json(&self.bootstrap(parse_body(body)?)?),
            other => Err(AppError::new(ErrorKind::NotFound, "unknown_agent", format!("no agent named {other}"))),
        }
    }

    /// Looks an object up in a collection or in a wrapper's cache.
    fn find_object(&self, object_id: &str, source: &str) -> Result<CuratedObject, AppError> {
        let name = if self.ctx.wrappers.is_dynamic(source) {
            cache_collection_name(source)
        } else {
            source.to_string()
        };
        let unknown = || {
            AppError::new(
                ErrorKind::NotFound,
                "unknown_object",
                format!("object {object_id:?} not found in {source}"),
            )
        };
        let handle = self.store().get(&name).map_err(|_| unknown())?;
        let coll = handle.read();
        coll.get(object_id).cloned().ok_or_else(unknown)
    }

    pub fn cart(&self) -> Cart {
        self.cart.lock().clone()
    }

    pub fn cart_update(&self, req: CartRequest) -> Result<Cart, AppError> {
        let mut cart = self.cart.lock();
        match req.action {
            CartAction::Add => {
                self.find_object(&req.object_id, &req.source)?;
                cart.add(CartItem {
                    object_id: req.object_id,
                    source: req.source,
                    purpose: req.purpose,
                });
            }
            CartAction::Remove => {
                if cart.remove(&req.object_id, &req.source).is_none() {
                    return Err(AppError::new(
                        ErrorKind::NotFound,
                        "unknown_object",
                        format!("{} from {} is not in the cart", req.object_id, req.source),
                    ));
                }
            }
        }
        if let Some(path) = &self.cart_file {
            save_cart(path, &cart).map_err(|e| AppError::new(ErrorKind::Internal, "storage_failure", e.to_string()))?;
        }
        Ok(cart.clone())
    }

    /// Canonical text of every BACKGROUND cart item, blank-line separated.
    fn cart_background(&self) -> Result<Option<String>, AppError> {
        let items: Vec<CartItem> = self.cart.lock().with_purpose(CartPurpose::Background).cloned().collect();
        let mut blocks = Vec::with_capacity(items.len());
        for item in items {
            let obj = self.find_object(&item.object_id, &item.source)?;
            blocks.push(canonical_serialize_with(&obj, Default::default()));
        }
        Ok(Some(blocks.join("\n\n")).filter(|b| !b.is_empty()))
    }

    fn refine_seed(&self, collection: &str) -> Result<Map<String, Value>, AppError> {
        let item = self
            .cart
            .lock()
            .with_purpose(CartPurpose::Refine)
            .find(|i| i.source == collection)
            .cloned()
            .ok_or_else(|| AppError::validation("no seed given and no REFINE item in the cart for this collection"))?;
        match self.find_object(&item.object_id, &item.source)?.to_value() {
            Value::Object(map) => Ok(map),
            _ => unreachable!("objects serialise as maps"),
        }
    }

    pub fn bundle_export(&self, name: &str, req: BundleExportRequest) -> Result<BundleReport, AppError> {
        let handle = self.store().get(name)?;
        let coll = handle.read();
        export_bundle(&coll, &req.dir)?;
        Ok(BundleReport {
            collection: name.to_string(),
            dir: req.dir,
            object_count: coll.len(),
        })
    }

    pub fn bundle_import(&self, req: BundleImportRequest) -> Result<BundleReport, AppError> {
        let mut coll = import_bundle(&req.dir)?;
        if let Some(name) = &req.name {
            coll = coll.renamed(name);
        }
        let name = coll.name().to_string();
        let count = coll.len();
        if self.store().exists(&name) {
            return Err(StoreError::CollectionExists(name).into());
        }
        self.store().put(coll)?;
        Ok(BundleReport {
            collection: name,
            dir: req.dir,
            object_count: count,
        })
    }
}
