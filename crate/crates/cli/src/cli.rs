//! Command-line front end. Exit status: 0 success, 1 domain error, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use curation_core::agents::{BootstrapConfig, Claim, ExtractStrategy};
use curation_core::schema::SchemaSpec;
use curation_core::sources::FlatFormat;
use curation_core::{CuratedObject, DistanceMetric};
use serde_json::{Map, Value};

use crate::app::{
    App, AppError, BootstrapRequest, BundleExportRequest, BundleImportRequest, CartAction, CartRequest, ChatRequest,
    CiteSeekRequest, CreateCollectionRequest, CurateRequest, ExtractRequest, IngestKind, IngestRequest, InsertRequest,
    MatchRequest, SearchRequest,
};
use crate::cart::CartPurpose;
use crate::config::{Overrides, ProcessEnv, Settings};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "curation", version, about = "Embedding-backed knowledge curation with language-model agents")]
pub struct Cli {
    /// Config file (default: $CURATION_CONFIG, then ./curation.toml)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Store directory
    #[arg(long, global = true)]
    pub db_path: Option<PathBuf>,
    /// Completion model name
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Emit one JSON document instead of text
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List, create or delete collections
    #[command(subcommand)]
    Collections(CollectionsCmd),
    /// Add one object to a collection
    Insert(InsertArgs),
    /// Load objects from a file into a collection
    #[command(subcommand)]
    Ingest(IngestCmd),
    /// Embedding index maintenance
    #[command(subcommand)]
    Index(IndexCmd),
    /// Semantic search over a collection or wrapper
    Search(SearchArgs),
    /// Answer a question from retrieved objects, with citations
    Chat(ChatArgs),
    /// Complete a partial object
    Curate(CurateArgs),
    /// Extract an object from free text
    Extract(ExtractArgs),
    /// Find evidence for a claim
    Citeseek(CiteSeekArgs),
    /// Pick the best matching term
    Match(MatchArgs),
    /// Generate a schema or sample data
    #[command(subcommand)]
    Bootstrap(BootstrapCmd),
    /// Export or import index bundles
    #[command(subcommand)]
    Bundle(BundleCmd),
    /// Inspect or change the cart
    #[command(subcommand)]
    Cart(CartCmd),
    /// 2-D PCA projection of a collection
    Projection(CollectionArg),
    /// List known source wrappers
    Wrappers,
    /// Show the resolved configuration
    Config,
    /// Run the HTTP API
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct CollectionArg {
    /// Collection name (default: the configured active collection)
    #[arg(long)]
    pub collection: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum CollectionsCmd {
    List,
    Create {
        name: String,
        #[arg(long, default_value = "cosine")]
        metric: DistanceMetric,
    },
    Delete {
        name: String,
    },
    /// Print every object in a collection
    Show {
        name: String,
    },
}

#[derive(Debug, Args)]
pub struct InsertArgs {
    #[command(flatten)]
    pub target: CollectionArg,
    /// YAML or JSON file holding the object
    #[arg(long, conflicts_with = "object")]
    pub file: Option<PathBuf>,
    /// The object as inline JSON
    #[arg(long)]
    pub object: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum IngestCmd {
    /// Ontology graph JSON
    Ontology {
        path: PathBuf,
        #[command(flatten)]
        target: CollectionArg,
        #[arg(long)]
        metric: Option<DistanceMetric>,
        /// Skip embedding
        #[arg(long)]
        no_index: bool,
    },
    /// JSON, YAML, CSV or TSV records
    Flat {
        path: PathBuf,
        #[command(flatten)]
        target: CollectionArg,
        #[arg(long)]
        format: Option<FlatFormat>,
        #[arg(long, default_value = "id")]
        id_field: String,
        #[arg(long, default_value = "label")]
        label_field: String,
        #[arg(long)]
        metric: Option<DistanceMetric>,
        #[arg(long)]
        no_index: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum IndexCmd {
    Build(CollectionArg),
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub target: CollectionArg,
    #[arg(long)]
    pub query: String,
    #[arg(long)]
    pub k: Option<usize>,
    /// Re-rank with maximal marginal relevance
    #[arg(long)]
    pub diversify: bool,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub pool: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ChatArgs {
    /// Collections or wrappers to answer from (repeatable)
    #[arg(long = "collection")]
    pub collections: Vec<String>,
    #[arg(long)]
    pub question: String,
    #[arg(long)]
    pub k: Option<usize>,
    /// Ignore BACKGROUND items in the cart
    #[arg(long)]
    pub no_cart: bool,
}

#[derive(Debug, Args)]
pub struct CurateArgs {
    #[command(flatten)]
    pub target: CollectionArg,
    /// Seed field as key=value (repeatable)
    #[arg(long = "seed", value_parser = parse_pair)]
    pub seed: Vec<(String, String)>,
    /// YAML or JSON file with the seed object
    #[arg(long)]
    pub seed_file: Option<PathBuf>,
    #[arg(long)]
    pub max_examples: Option<usize>,
    #[arg(long)]
    pub generate_background: bool,
    #[arg(long)]
    pub instructions: Option<String>,
    #[arg(long)]
    pub no_cart: bool,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub target: CollectionArg,
    #[arg(long, conflicts_with = "text_file")]
    pub text: Option<String>,
    #[arg(long)]
    pub text_file: Option<PathBuf>,
    #[arg(long)]
    pub strategy: Option<ExtractStrategy>,
    #[arg(long, conflicts_with = "instructions_file")]
    pub instructions: Option<String>,
    #[arg(long)]
    pub instructions_file: Option<PathBuf>,
    /// Collection or wrapper searched for background
    #[arg(long)]
    pub background_source: Option<String>,
    #[arg(long)]
    pub no_cart: bool,
}

#[derive(Debug, Args)]
pub struct CiteSeekArgs {
    /// Collection or wrapper to search
    #[arg(long)]
    pub source: String,
    /// The claim as free text
    #[arg(long, conflicts_with_all = ["subject", "predicate", "object"])]
    pub claim: Option<String>,
    #[arg(long, requires_all = ["predicate", "object"])]
    pub subject: Option<String>,
    #[arg(long)]
    pub predicate: Option<String>,
    #[arg(long)]
    pub object: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[command(flatten)]
    pub target: CollectionArg,
    #[arg(long)]
    pub query: String,
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum BootstrapCmd {
    /// Generate a schema from a YAML starting configuration
    Schema {
        #[arg(long)]
        input: PathBuf,
    },
    /// Generate instances of a schema's main class
    Data {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, default_value_t = 3)]
        count: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum BundleCmd {
    Export {
        #[command(flatten)]
        target: CollectionArg,
        #[arg(long)]
        dir: PathBuf,
    },
    Import {
        #[arg(long)]
        dir: PathBuf,
        /// Store under this name
        #[arg(long)]
        name: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum CartCmd {
    List,
    Add {
        #[arg(long)]
        object_id: String,
        #[arg(long)]
        source: String,
        #[arg(long, default_value = "BACKGROUND")]
        purpose: CartPurpose,
    },
    Remove {
        #[arg(long)]
        object_id: String,
        #[arg(long)]
        source: String,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub port: Option<u16>,
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    if k.trim().is_empty() {
        return Err("empty key".into());
    }
    Ok((k.trim().to_string(), v.to_string()))
}

fn read_text(path: &Path) -> Result<String, AppError> {
    std::fs::read_to_string(path).map_err(|e| AppError::validation(format!("{}: {e}", path.display())))
}

/// Reads a YAML or JSON document (JSON is valid YAML).
fn read_document(path: &Path) -> Result<Value, AppError> {
    let text = read_text(path)?;
    serde_yaml::from_str(&text).map_err(|e| AppError::validation(format!("{}: {e}", path.display())))
}

fn collection(arg: &CollectionArg, settings: &Settings) -> Result<String, AppError> {
    arg.collection
        .clone()
        .or_else(|| settings.active_collection.clone())
        .ok_or_else(|| AppError::validation("no --collection given and no active collection configured"))
}

fn json<T: serde::Serialize>(v: T) -> Result<Value, AppError> {
    serde_json::to_value(v).map_err(|e| AppError::new(crate::app::ErrorKind::Internal, "serialization_failure", e.to_string()))
}

/// Executes one non-serve command and returns its payload.
pub fn execute(app: &App, command: Command) -> Result<Value, AppError> {
    let settings = app.settings();
    match command {
        Command::Collections(cmd) => match cmd {
            CollectionsCmd::List => json(app.list_collections()?),
            CollectionsCmd::Create { name, metric } => json(app.create_collection(CreateCollectionRequest { name, metric })?),
            CollectionsCmd::Delete { name } => json(app.delete_collection(&name)?),
            CollectionsCmd::Show { name } => json(app.list_objects(&name)?),
        },
        Command::Insert(args) => {
            let name = collection(&args.target, settings)?;
            let value = match (&args.file, &args.object) {
                (Some(path), _) => read_document(path)?,
                (None, Some(text)) => serde_json::from_str(text).map_err(|e| AppError::validation(e.to_string()))?,
                (None, None) => return Err(AppError::validation("give --file or --object")),
            };
            let object: CuratedObject = serde_json::from_value(value).map_err(|e| AppError::validation(e.to_string()))?;
            json(app.insert_object(&name, InsertRequest { object })?)
        }
        Command::Ingest(cmd) => match cmd {
            IngestCmd::Ontology { path, target, metric, no_index } => {
                let name = collection(&target, settings)?;
                json(app.ingest(
                    &name,
                    IngestRequest {
                        kind: IngestKind::Ontology,
                        path,
                        format: None,
                        id_field: "id".into(),
                        label_field: "label".into(),
                        metric,
                        index: !no_index,
                    },
                )?)
            }
            IngestCmd::Flat { path, target, format, id_field, label_field, metric, no_index } => {
                let name = collection(&target, settings)?;
                json(app.ingest(
                    &name,
                    IngestRequest {
                        kind: IngestKind::Flat,
                        path,
                        format,
                        id_field,
                        label_field,
                        metric,
                        index: !no_index,
                    },
                )?)
            }
        },
        Command::Index(IndexCmd::Build(target)) => json(app.build_index(&collection(&target, settings)?)?),
        Command::Search(args) => json(app.search(SearchRequest {
            collection: collection(&args.target, settings)?,
            query: args.query,
            k: args.k,
            diversify: args.diversify,
            lambda: args.lambda,
            pool: args.pool,
        })?),
        Command::Chat(args) => {
            let sources = if args.collections.is_empty() {
                vec![collection(&CollectionArg { collection: None }, settings)?]
            } else {
                args.collections
            };
            json(app.chat(ChatRequest {
                sources,
                question: args.question,
                k: args.k,
                use_cart: !args.no_cart,
            })?)
        }
        Command::Curate(args) => {
            let mut seed = match &args.seed_file {
                Some(path) => match read_document(path)? {
                    Value::Object(m) => Some(m),
                    _ => return Err(AppError::validation("seed file must hold a mapping")),
                },
                None => None,
            };
            if !args.seed.is_empty() {
                let map = seed.get_or_insert_with(Map::new);
                for (k, v) in args.seed {
                    map.insert(k, Value::String(v));
                }
            }
            json(app.curate(CurateRequest {
                collection: collection(&args.target, settings)?,
                seed,
                max_examples: args.max_examples,
                generate_background: args.generate_background,
                instructions: args.instructions,
                use_cart: !args.no_cart,
            })?)
        }
        Command::Extract(args) => {
            let text = match (&args.text, &args.text_file) {
                (Some(t), _) => t.clone(),
                (None, Some(p)) => read_text(p)?,
                (None, None) => return Err(AppError::validation("give --text or --text-file")),
            };
            let instructions = match (&args.instructions, &args.instructions_file) {
                (Some(i), _) => Some(i.clone()),
                (None, Some(p)) => Some(read_text(p)?),
                (None, None) => None,
            };
            json(app.extract(ExtractRequest {
                collection: collection(&args.target, settings)?,
                text,
                strategy: args.strategy,
                instructions,
                background_source: args.background_source,
                use_cart: !args.no_cart,
            })?)
        }
        Command::Citeseek(args) => {
            let claim = match (args.claim, args.subject, args.predicate, args.object) {
                (Some(text), ..) => Claim::Text(text),
                (None, Some(subject), Some(predicate), Some(object)) => Claim::Triple { subject, predicate, object },
                _ => return Err(AppError::validation("give --claim or --subject/--predicate/--object")),
            };
            json(app.citeseek(CiteSeekRequest {
                source: args.source,
                claim,
                k: args.k,
            })?)
        }
        Command::Match(args) => json(app.match_term(MatchRequest {
            collection: collection(&args.target, settings)?,
            query: args.query,
            n: args.n,
        })?),
        Command::Bootstrap(cmd) => {
            let req = match cmd {
                BootstrapCmd::Schema { input } => BootstrapRequest::Schema {
                    config: BootstrapConfig::from_yaml(&read_text(&input)?)?,
                },
                BootstrapCmd::Data { schema, count } => BootstrapRequest::Data {
                    schema: SchemaSpec::from_yaml(&read_text(&schema)?)
                        .map_err(|e| AppError::validation(e.to_string()))?,
                    count,
                },
            };
            json(app.bootstrap(req)?)
        }
        Command::Bundle(cmd) => match cmd {
            BundleCmd::Export { target, dir } => json(app.bundle_export(&collection(&target, settings)?, BundleExportRequest { dir })?),
            BundleCmd::Import { dir, name } => json(app.bundle_import(BundleImportRequest { dir, name })?),
        },
        Command::Cart(cmd) => match cmd {
            CartCmd::List => json(app.cart()),
            CartCmd::Add { object_id, source, purpose } => json(app.cart_update(CartRequest {
                action: CartAction::Add,
                object_id,
                source,
                purpose,
            })?),
            CartCmd::Remove { object_id, source } => json(app.cart_update(CartRequest {
                action: CartAction::Remove,
                object_id,
                source,
                purpose: CartPurpose::Background,
            })?),
        },
        Command::Projection(target) => json(app.projection(&collection(&target, settings)?)?),
        Command::Wrappers => json(app.wrappers()),
        Command::Config => json(app.config()),
        Command::Serve(_) => Err(AppError::validation("serve is handled by run")),
    }
}

/// Human-readable rendering: ranked lines for searches, YAML otherwise.
pub fn render_text(value: &Value) -> String {
    if let (Some(hits), Some(objects)) = (value.get("hits").and_then(Value::as_array), value.get("objects").and_then(Value::as_array)) {
        return hits
            .iter()
            .zip(objects)
            .map(|(h, o)| {
                format!(
                    "{}\t{}\t{:.4}\t{}\n",
                    h["rank"],
                    h["object_id"].as_str().unwrap_or_default(),
                    h["distance"].as_f64().unwrap_or_default(),
                    o["label"].as_str().unwrap_or_default()
                )
            })
            .collect();
    }
    let mut shown = value.clone();
    if let Value::Object(map) = &mut shown {
        map.remove("trace");
    }
    serde_yaml::to_string(&shown).unwrap_or_else(|_| shown.to_string())
}

/// Parses `args` and runs the command, writing to `out` and `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{rendered}");
            } else {
                let _ = write!(out, "{rendered}");
            }
            return code;
        }
    };
    let flags = Overrides {
        config: cli.config.clone(),
        db_path: cli.db_path.clone(),
        model_name: cli.model.clone(),
        collection: None,
        port: match &cli.command {
            Command::Serve(s) => s.port,
            _ => None,
        },
    };
    let as_json = cli.json;
    let fail = |out: &mut dyn Write, err: &mut dyn Write, e: AppError| {
        if as_json {
            let _ = writeln!(out, "{}", serde_json::to_string(&e).unwrap_or_default());
        }
        let _ = writeln!(err, "error: {e}");
        EXIT_DOMAIN
    };
    let settings = match Settings::resolve(&flags, &ProcessEnv) {
        Ok(s) => s,
        Err(e) => return fail(out, err, AppError::validation(e.to_string())),
    };
    let app = match App::open(settings) {
        Ok(a) => a,
        Err(e) => return fail(out, err, e),
    };
    if let Command::Serve(_) = cli.command {
        let port = app.settings().port;
        let runtime = match tokio::runtime::Runtime::new() {
            Ok(r) => r,
            Err(e) => return fail(out, err, AppError::new(crate::app::ErrorKind::Internal, "runtime_failure", e.to_string())),
        };
        return match runtime.block_on(crate::server::serve(Arc::new(app), port)) {
            Ok(()) => EXIT_OK,
            Err(e) => fail(out, err, AppError::new(crate::app::ErrorKind::Internal, "bind_failure", e.to_string())),
        };
    }
    match execute(&app, cli.command) {
        Ok(value) => {
            let text = if as_json {
                format!("{}\n", serde_json::to_string(&value).unwrap_or_default())
            } else {
                render_text(&value)
            };
            let _ = out.write_all(text.as_bytes());
            EXIT_OK
        }
        Err(e) => fail(out, err, e),
    }
}
