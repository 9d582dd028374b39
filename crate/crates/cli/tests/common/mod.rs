//! Scenario fixtures and the drivers that replay them in-process, over HTTP
//! and through the CLI binary.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use curation::app::App;
use curation::config::{Overrides, Settings};
use curation_core::http::{HttpRequest, HttpResponse, HttpTransport, ReplayTransport};
use curation_core::providers::{MockProvider, ProviderConfig, ProviderKind, ProviderSet};
use curation_core::sources::{PubMedWrapper, SearchTerms, WikipediaWrapper, WrapperRegistry};
use curation_core::schema::SchemaSpec;
use curation_core::Store;
use serde::Deserialize;
use serde_json::{json, Value};

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").canonicalize().expect("fixtures dir")
}

pub fn completions_file() -> PathBuf {
    fixtures_dir().join("completions.yaml")
}

pub fn http_dir() -> PathBuf {
    fixtures_dir().join("http")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Op {
    Ingest { collection: String, path: PathBuf },
    Insert { collection: String, object: Value },
    Cart { object_id: String, source: String, #[serde(default)] purpose: Option<String> },
}

#[derive(Debug, Clone, Deserialize)]
pub struct PubMedStub {
    pub terms: Vec<String>,
    pub ids: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct WikipediaStub {
    pub terms: Vec<String>,
    pub titles: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expect {
    #[serde(default)]
    pub object: Option<Value>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentStep {
    pub agent: String,
    pub request: Value,
    #[serde(default)]
    pub replies: Vec<String>,
    #[serde(default)]
    pub pubmed: Option<PubMedStub>,
    #[serde(default)]
    pub wikipedia: Option<WikipediaStub>,
    #[serde(default)]
    pub expect: Expect,
}

impl AgentStep {
    /// Model replies in prompt order, with the query decomposition first.
    pub fn all_replies(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(p) = &self.pubmed {
            out.push(p.terms.join("\n"));
        }
        if let Some(w) = &self.wikipedia {
            out.push(w.terms.join("\n"));
        }
        out.extend(self.replies.iter().cloned());
        out
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Step {
    Agent(AgentStep),
    Op(Op),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub setup: Vec<Op>,
    pub steps: Vec<Step>,
}

impl Scenario {
    pub fn agent_steps(&self) -> impl Iterator<Item = &AgentStep> {
        self.steps.iter().filter_map(|s| match s {
            Step::Agent(a) => Some(a),
            Step::Op(_) => None,
        })
    }
}

pub fn load_scenarios() -> Vec<Scenario> {
    let dir = fixtures_dir().join("agents");
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .expect("scenario dir")
        .map(|e| e.expect("entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "yaml"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            // Through JSON so externally tagged ops read as plain maps.
            let raw: Value = serde_yaml::from_str(&fs::read_to_string(p).expect("read scenario"))
                .unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            serde_json::from_value::<Scenario>(raw).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
        })
        .collect()
}

pub fn scenario(name: &str) -> Scenario {
    load_scenarios()
        .into_iter()
        .find(|s| s.name == name)
        .unwrap_or_else(|| panic!("no scenario {name}"))
}

/// Fills `{"$from": "<step>/<pointer>"}` placeholders from earlier step results.
pub fn resolve_request(request: &Value, results: &[Value]) -> Value {
    match request {
        Value::Object(map) => {
            if let (1, Some(Value::String(r))) = (map.len(), map.get("$from")) {
                let (step, pointer) = r.split_once('/').expect("step/pointer");
                let step: usize = step.parse().expect("step index");
                return results[step]
                    .pointer(&format!("/{pointer}"))
                    .cloned()
                    .unwrap_or_else(|| panic!("nothing at {r}"));
            }
            Value::Object(map.iter().map(|(k, v)| (k.clone(), resolve_request(v, results))).collect())
        }
        Value::Array(items) => Value::Array(items.iter().map(|v| resolve_request(v, results)).collect()),
        other => other.clone(),
    }
}

pub fn absolute(path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        fixtures_dir().join(path)
    }
}

// ---- source stubs ----

#[derive(Debug, Clone, Deserialize)]
pub struct AbstractPart {
    #[serde(default)]
    pub label: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PubMedEntry {
    pub pmid: String,
    #[serde(default)]
    pub pmcid: Option<String>,
    pub title: String,
    pub r#abstract: Vec<AbstractPart>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct WikiPage {
    pub title: String,
    pub extract: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SourceDb {
    pub pubmed: Vec<PubMedEntry>,
    pub wikipedia: Vec<WikiPage>,
}

impl SourceDb {
    pub fn load() -> Self {
        let text = fs::read_to_string(fixtures_dir().join("sources.yaml")).expect("sources.yaml");
        serde_yaml::from_str(&text).expect("parse sources.yaml")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn efetch_body(entries: &[&PubMedEntry]) -> String {
    let mut out = String::from("<?xml version=\"1.0\" ?>\n<PubmedArticleSet>\n");
    for e in entries {
        out.push_str("<PubmedArticle>\n<MedlineCitation Status=\"MEDLINE\">\n");
        out.push_str(&format!("<PMID Version=\"1\">{}</PMID>\n<Article>\n", e.pmid));
        out.push_str(&format!("<ArticleTitle>{}</ArticleTitle>\n<Abstract>\n", xml_escape(&e.title)));
        for part in &e.r#abstract {
            match &part.label {
                Some(l) => out.push_str(&format!(
                    "<AbstractText Label=\"{}\">{}</AbstractText>\n",
                    xml_escape(l),
                    xml_escape(&part.text)
                )),
                None => out.push_str(&format!("<AbstractText>{}</AbstractText>\n", xml_escape(&part.text))),
            }
        }
        out.push_str("</Abstract>\n</Article>\n</MedlineCitation>\n<PubmedData>\n<ArticleIdList>\n");
        out.push_str(&format!("<ArticleId IdType=\"pubmed\">{}</ArticleId>\n", e.pmid));
        if let Some(pmc) = &e.pmcid {
            out.push_str(&format!("<ArticleId IdType=\"pmc\">{pmc}</ArticleId>\n"));
        }
        out.push_str("</ArticleIdList>\n</PubmedData>\n</PubmedArticle>\n");
    }
    out.push_str("</PubmedArticleSet>\n");
    out
}

/// Every HTTP exchange the scenarios make, built with the wrappers' own URL builders.
pub fn stub_exchanges(scenarios: &[Scenario], db: &SourceDb) -> Vec<(HttpRequest, HttpResponse)> {
    let dummy: Arc<dyn HttpTransport> = Arc::new(ReplayTransport::new());
    let pubmed = PubMedWrapper::new(dummy.clone(), None);
    let wiki = WikipediaWrapper::new(dummy);
    let ok = |body: String| HttpResponse { status: 200, body };
    let mut out = Vec::new();
    for step in scenarios.iter().flat_map(Scenario::agent_steps) {
        if let Some(p) = &step.pubmed {
            let terms = SearchTerms::from_reply("", &p.terms.join("\n"));
            let search = json!({"header": {"type": "esearch"}, "esearchresult": {
                "count": p.ids.len().to_string(), "retmax": p.ids.len().to_string(), "retstart": "0", "idlist": p.ids,
            }});
            out.push((HttpRequest::get(pubmed.esearch_url(&terms, 10)), ok(search.to_string())));
            if !p.ids.is_empty() {
                let entries: Vec<&PubMedEntry> = p
                    .ids
                    .iter()
                    .map(|id| db.pubmed.iter().find(|e| &e.pmid == id).unwrap_or_else(|| panic!("no record {id}")))
                    .collect();
                out.push((HttpRequest::get(pubmed.efetch_url(&p.ids)), ok(efetch_body(&entries))));
            }
        }
        if let Some(w) = &step.wikipedia {
            let mut all: Vec<String> = Vec::new();
            for term in &w.terms {
                let titles = w.titles.get(term).cloned().unwrap_or_default();
                let hits: Vec<Value> = titles.iter().map(|t| json!({"ns": 0, "title": t})).collect();
                let body = json!({"batchcomplete": true, "query": {"search": hits}});
                out.push((HttpRequest::get(wiki.search_url(term, 10)), ok(body.to_string())));
                for t in titles {
                    if all.len() < 10 && !all.contains(&t) {
                        all.push(t);
                    }
                }
            }
            if !all.is_empty() {
                let pages: Vec<Value> = all
                    .iter()
                    .map(|t| {
                        let page = db.wikipedia.iter().find(|p| &p.title == t).unwrap_or_else(|| panic!("no page {t}"));
                        json!({"ns": 0, "title": page.title, "extract": page.extract})
                    })
                    .collect();
                let body = json!({"batchcomplete": true, "query": {"pages": pages}});
                out.push((HttpRequest::get(wiki.extracts_url(&all)), ok(body.to_string())));
            }
        }
    }
    out
}

// ---- app construction ----

pub fn replay_settings(db_path: &Path) -> Settings {
    let mut settings = Settings::resolve(
        &Overrides {
            db_path: Some(db_path.to_path_buf()),
            ..Overrides::default()
        },
        &HashMap::<String, String>::new(),
    )
    .expect("settings");
    settings.provider = ProviderConfig {
        kind: ProviderKind::MockReplay,
        fixtures: vec![completions_file()],
        strict: true,
        model: settings.model_name.clone(),
        ..ProviderConfig::default()
    };
    settings.sources.replay_dir = Some(http_dir());
    settings
}

/// Wrappers without an NCBI key so recorded URLs never depend on the environment.
pub fn keyless_registry(transport: Arc<dyn HttpTransport>) -> Arc<WrapperRegistry> {
    let mut reg = WrapperRegistry::new();
    reg.register(Arc::new(PubMedWrapper::new(transport.clone(), None)));
    reg.register(Arc::new(WikipediaWrapper::new(transport)));
    Arc::new(reg)
}

/// An in-memory app replaying recorded completions and HTTP exchanges.
pub fn replay_app() -> (App, Arc<ReplayTransport>) {
    let settings = replay_settings(Path::new("unused-db"));
    let providers = settings.provider.build().expect("providers");
    let transport = Arc::new(ReplayTransport::from_dir(&http_dir()).expect("http fixtures"));
    let app = App::with_registry(
        settings,
        Arc::new(Store::in_memory()),
        providers,
        keyless_registry(transport.clone()),
    );
    (app, transport)
}

/// An in-memory app whose model answers from `replies` in order and records them.
pub fn recording_app(replies: &[(String, String)], transport: Arc<ReplayTransport>) -> (App, Arc<MockProvider>) {
    let settings = replay_settings(Path::new("unused-db"));
    let mut builder = MockProvider::builder()
        .strict(false)
        .dimension(settings.provider.embed_dimension)
        .model_name(&settings.model_name);
    for (scenario, text) in replies {
        builder = builder.script(Some(scenario), text.clone());
    }
    let mock = Arc::new(builder.build());
    let providers = ProviderSet {
        completions: mock.clone(),
        embedder: mock.clone(),
    };
    let app = App::with_registry(settings, Arc::new(Store::in_memory()), providers, keyless_registry(transport));
    (app, mock)
}

// ---- drivers ----

pub trait Driver {
    fn op(&mut self, op: &Op) -> Result<Value, Value>;
    fn agent(&mut self, agent: &str, request: &Value) -> Result<Value, Value>;
}

pub struct Direct<'a>(pub &'a App);

fn wrap<T: serde::Serialize>(r: Result<T, curation::AppError>) -> Result<Value, Value> {
    r.map(|v| serde_json::to_value(v).expect("result json"))
        .map_err(|e| serde_json::to_value(e).expect("error json"))
}

impl Driver for Direct<'_> {
    fn op(&mut self, op: &Op) -> Result<Value, Value> {
        let app = self.0;
        match op {
            Op::Ingest { collection, path } => wrap(app.ingest(
                collection,
                serde_json::from_value(json!({"kind": "ontology", "path": absolute(path)})).expect("ingest"),
            )),
            Op::Insert { collection, object } => {
                let req = serde_json::from_value(json!({ "object": object })).expect("insert request");
                wrap(app.insert_object(collection, req))
            }
            Op::Cart { object_id, source, purpose } => wrap(app.cart_update(
                serde_json::from_value(cart_body(object_id, source, purpose.as_deref())).expect("cart request"),
            )),
        }
    }

    fn agent(&mut self, agent: &str, request: &Value) -> Result<Value, Value> {
        wrap(self.0.call_agent(agent, request.clone()))
    }
}

fn cart_body(object_id: &str, source: &str, purpose: Option<&str>) -> Value {
    let mut body = json!({"object_id": object_id, "source": source});
    if let Some(p) = purpose {
        body["purpose"] = json!(p);
    }
    body
}

/// Drives the axum router in-process.
pub struct Http {
    router: axum::Router,
    rt: tokio::runtime::Runtime,
}

impl Http {
    pub fn new(app: App) -> Self {
        Self {
            router: curation::server::router(Arc::new(app)),
            rt: tokio::runtime::Runtime::new().expect("runtime"),
        }
    }

    pub fn call(&self, method: &str, uri: &str, body: Option<&Value>) -> (u16, Value) {
        use http_body_util::BodyExt;
        use tower::ServiceExt;
        let mut req = axum::http::Request::builder().method(method).uri(uri);
        let body = match body {
            Some(b) => {
                req = req.header("content-type", "application/json");
                axum::body::Body::from(b.to_string())
            }
            None => axum::body::Body::empty(),
        };
        let req = req.body(body).expect("request");
        self.rt.block_on(async {
            let resp = self.router.clone().oneshot(req).await.expect("router");
            let status = resp.status().as_u16();
            let bytes = resp.into_body().collect().await.expect("body").to_bytes();
            let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).expect("json body") };
            (status, value)
        })
    }

    fn result(&self, method: &str, uri: &str, body: Option<&Value>) -> Result<Value, Value> {
        let (status, value) = self.call(method, uri, body);
        if (200..300).contains(&status) {
            Ok(value)
        } else {
            Err(value)
        }
    }
}

impl Driver for Http {
    fn op(&mut self, op: &Op) -> Result<Value, Value> {
        match op {
            Op::Ingest { collection, path } => self.result(
                "POST",
                &format!("/collections/{collection}/ingest"),
                Some(&json!({"kind": "ontology", "path": absolute(path)})),
            ),
            Op::Insert { collection, object } => {
                self.result("POST", &format!("/collections/{collection}/objects"), Some(&json!({ "object": object })))
            }
            Op::Cart { object_id, source, purpose } => {
                self.result("POST", "/cart", Some(&cart_body(object_id, source, purpose.as_deref())))
            }
        }
    }

    fn agent(&mut self, agent: &str, request: &Value) -> Result<Value, Value> {
        self.result("POST", &format!("/agents/{agent}"), Some(request))
    }
}

/// Runs the `curation` binary once per step against a replay config.
pub struct Cli {
    pub config: PathBuf,
    pub scratch: PathBuf,
}

impl Cli {
    pub fn new(dir: &Path) -> Self {
        Self {
            config: write_replay_config(dir),
            scratch: dir.to_path_buf(),
        }
    }

    pub fn run(&self, args: &[String]) -> (i32, String, String) {
        let out = std::process::Command::new(env!("CARGO_BIN_EXE_curation"))
            .arg("--json")
            .arg("--config")
            .arg(&self.config)
            .args(args)
            .env_remove("NCBI_API_KEY")
            .env_remove("CURATION_CONFIG")
            .env_remove("CURATION_DB_PATH")
            .env_remove("CURATION_MODEL")
            .env_remove("CURATION_COLLECTION")
            .env_remove("CURATION_PORT")
            .output()
            .expect("run curation");
        (
            out.status.code().unwrap_or(-1),
            String::from_utf8_lossy(&out.stdout).into_owned(),
            String::from_utf8_lossy(&out.stderr).into_owned(),
        )
    }

    fn result(&self, args: &[String]) -> Result<Value, Value> {
        let (code, stdout, stderr) = self.run(args);
        let value: Value = serde_json::from_str(stdout.trim())
            .unwrap_or_else(|e| panic!("non-JSON output ({e}) for {args:?}: {stdout:?} {stderr:?}"));
        if code == 0 {
            Ok(value)
        } else {
            Err(value)
        }
    }
}

impl Driver for Cli {
    fn op(&mut self, op: &Op) -> Result<Value, Value> {
        self.result(&cli_op_args(op))
    }

    fn agent(&mut self, agent: &str, request: &Value) -> Result<Value, Value> {
        let args = cli_args(agent, request, &self.scratch);
        self.result(&args)
    }
}

/// Runs setup and steps, returning each agent or op result in step order.
pub fn run_scenario(driver: &mut dyn Driver, scenario: &Scenario) -> Vec<Result<Value, Value>> {
    for op in &scenario.setup {
        driver
            .op(op)
            .unwrap_or_else(|e| panic!("{}: setup {op:?} failed: {e}", scenario.name));
    }
    let mut results: Vec<Value> = Vec::new();
    let mut out = Vec::new();
    for step in &scenario.steps {
        let r = match step {
            Step::Agent(a) => {
                let request = resolve_request(&a.request, &results);
                driver.agent(&a.agent, &request)
            }
            Step::Op(op) => driver.op(op),
        };
        results.push(r.clone().unwrap_or(Value::Null));
        out.push(r);
    }
    out
}

/// Key-by-key object equality after a round trip through the object type.
pub fn same_object(actual: &Value, expected: &Value) -> bool {
    let a: Result<curation_core::CuratedObject, _> = serde_json::from_value(actual.clone());
    let e: Result<curation_core::CuratedObject, _> = serde_json::from_value(expected.clone());
    matches!((a, e), (Ok(a), Ok(e)) if a == e)
}

/// Converts a step's JSON request into CLI arguments. Files the CLI needs are
/// written under `scratch`.
pub fn cli_args(agent: &str, req: &Value, scratch: &Path) -> Vec<String> {
    let s = |v: &Value| v.as_str().expect("string field").to_string();
    let mut args: Vec<String> = vec![agent.to_string()];
    fn flag(args: &mut Vec<String>, name: &str, value: Option<&Value>) {
        if let Some(v) = value.filter(|v| !v.is_null()) {
            args.push(format!("--{name}"));
            args.push(match v {
                Value::String(t) => t.clone(),
                other => other.to_string(),
            });
        }
    }
    match agent {
        "search" => {
            flag(&mut args, "collection", req.get("collection"));
            flag(&mut args, "query", req.get("query"));
            flag(&mut args, "k", req.get("k"));
            flag(&mut args, "lambda", req.get("lambda"));
            flag(&mut args, "pool", req.get("pool"));
            if req.get("diversify") == Some(&Value::Bool(true)) {
                args.push("--diversify".into());
            }
        }
        "chat" => {
            for src in req["sources"].as_array().expect("sources") {
                flag(&mut args, "collection", Some(src));
            }
            flag(&mut args, "question", req.get("question"));
            flag(&mut args, "k", req.get("k"));
            if req.get("use_cart") == Some(&Value::Bool(false)) {
                args.push("--no-cart".into());
            }
        }
        "curate" => {
            flag(&mut args, "collection", req.get("collection"));
            if let Some(seed) = req.get("seed").and_then(Value::as_object) {
                for (k, v) in seed {
                    args.push("--seed".into());
                    args.push(format!("{k}={}", s(v)));
                }
            }
            flag(&mut args, "max-examples", req.get("max_examples"));
            flag(&mut args, "instructions", req.get("instructions"));
            if req.get("generate_background") == Some(&Value::Bool(true)) {
                args.push("--generate-background".into());
            }
            if req.get("use_cart") == Some(&Value::Bool(false)) {
                args.push("--no-cart".into());
            }
        }
        "extract" => {
            flag(&mut args, "collection", req.get("collection"));
            flag(&mut args, "text", req.get("text"));
            flag(&mut args, "strategy", req.get("strategy"));
            flag(&mut args, "instructions", req.get("instructions"));
            flag(&mut args, "background-source", req.get("background_source"));
            if req.get("use_cart") == Some(&Value::Bool(false)) {
                args.push("--no-cart".into());
            }
        }
        "citeseek" => {
            flag(&mut args, "source", req.get("source"));
            match &req["claim"] {
                Value::String(_) => flag(&mut args, "claim", req.get("claim")),
                triple => {
                    flag(&mut args, "subject", triple.get("subject"));
                    flag(&mut args, "predicate", triple.get("predicate"));
                    flag(&mut args, "object", triple.get("object"));
                }
            }
            flag(&mut args, "k", req.get("k"));
        }
        "match" => {
            flag(&mut args, "collection", req.get("collection"));
            flag(&mut args, "query", req.get("query"));
            flag(&mut args, "n", req.get("n"));
        }
        "bootstrap" => {
            args.clear();
            args.push("bootstrap".into());
            match req["mode"].as_str() {
                Some("schema") => {
                    let path = scratch.join("bootstrap_config.yaml");
                    fs::write(&path, serde_yaml::to_string(&req["config"]).expect("yaml")).expect("write config");
                    args.extend(["schema".into(), "--input".into(), path.display().to_string()]);
                }
                Some("data") => {
                    let schema: SchemaSpec = serde_json::from_value(req["schema"].clone()).expect("schema");
                    let path = scratch.join("bootstrap_schema.yaml");
                    fs::write(&path, schema.to_yaml()).expect("write schema");
                    args.extend(["data".into(), "--schema".into(), path.display().to_string()]);
                    if let Some(n) = req.get("count") {
                        args.extend(["--count".into(), n.to_string()]);
                    }
                }
                other => panic!("bootstrap mode {other:?}"),
            }
        }
        other => panic!("no CLI mapping for {other}"),
    }
    args
}

pub fn cli_op_args(op: &Op) -> Vec<String> {
    match op {
        Op::Ingest { collection, path } => vec![
            "ingest".into(),
            "ontology".into(),
            absolute(path).display().to_string(),
            "--collection".into(),
            collection.clone(),
        ],
        Op::Insert { collection, object } => vec![
            "insert".into(),
            "--collection".into(),
            collection.clone(),
            "--object".into(),
            object.to_string(),
        ],
        Op::Cart { object_id, source, purpose } => {
            let mut a = vec![
                "cart".into(),
                "add".into(),
                "--object-id".into(),
                object_id.clone(),
                "--source".into(),
                source.clone(),
            ];
            if let Some(p) = purpose {
                a.extend(["--purpose".into(), p.clone()]);
            }
            a
        }
    }
}

/// Writes a `curation.toml` for a replaying CLI or server under `dir`.
pub fn write_replay_config(dir: &Path) -> PathBuf {
    let path = dir.join("curation.toml");
    let text = format!(
        "db_path = \"db\"\n\n[provider]\nkind = \"mock_replay\"\nstrict = true\nfixtures = [{:?}]\n\n[sources]\nreplay_dir = {:?}\n",
        completions_file().display().to_string(),
        http_dir().display().to_string(),
    );
    fs::write(&path, text).expect("write config");
    path
}

/// Removes fields that legitimately differ between two runs.
pub fn strip_volatile(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("created_at");
            map.values_mut().for_each(strip_volatile);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_volatile),
        _ => {}
    }
}
