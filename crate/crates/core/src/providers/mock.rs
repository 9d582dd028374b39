use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs;
use std::path::Path;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::{check_embed_input, CompletionModel, CompletionResult, Embedder, PromptSpec, ProviderError};

pub const DEFAULT_MOCK_DIMENSION: usize = 256;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

/// Token-hash bag of words, unit-normalised. Text without tokens maps to e0.
pub fn mock_embed(text: &str, dimension: usize) -> Vec<f32> {
    assert!(dimension > 0, "dimension must be positive");
    let lower = text.to_lowercase();
    let mut acc = vec![0.0f64; dimension];
    let d = dimension as u64;
    let mut any = false;
    for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
        let h = fnv1a(token.as_bytes());
        acc[(h % d) as usize] += 1.0;
        acc[((h / d) % d) as usize] += 1.0;
        any = true;
    }
    if !any {
        let mut e0 = vec![0.0f32; dimension];
        e0[0] = 1.0;
        return e0;
    }
    let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
    acc.iter().map(|x| (x / norm) as f32).collect()
}

/// Stand-alone embedder applying [`mock_embed`].
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dimension: usize,
    name: String,
}

impl HashEmbedder {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            name: format!("mock-hash-{dimension}"),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_MOCK_DIMENSION)
    }
}

impl Embedder for HashEmbedder {
    fn model_name(&self) -> &str {
        &self.name
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError> {
        check_embed_input(texts)?;
        Ok(texts.iter().map(|t| mock_embed(t, self.dimension)).collect())
    }
}

/// Returns the same vector for every input.
#[derive(Debug, Clone)]
pub struct FixedEmbedder {
    vector: Vec<f32>,
}

impl FixedEmbedder {
    pub fn new(vector: Vec<f32>) -> Self {
        Self { vector }
    }
}

impl Embedder for FixedEmbedder {
    fn model_name(&self) -> &str {
        "fixed"
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError> {
        check_embed_input(texts)?;
        Ok(vec![self.vector.clone(); texts.len()])
    }
}

/// Looks vectors up by exact text; unknown text is an embedder failure.
#[derive(Debug, Clone, Default)]
pub struct TableEmbedder {
    table: HashMap<String, Vec<f32>>,
}

impl TableEmbedder {
    pub fn new(entries: impl IntoIterator<Item = (String, Vec<f32>)>) -> Self {
        Self {
            table: entries.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, text: impl Into<String>, vector: Vec<f32>) {
        self.table.insert(text.into(), vector);
    }
}

impl Embedder for TableEmbedder {
    fn model_name(&self) -> &str {
        "table"
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError> {
        check_embed_input(texts)?;
        texts
            .iter()
            .map(|t| {
                self.table
                    .get(t)
                    .cloned()
                    .ok_or_else(|| ProviderError::EmbedderFailure(format!("no vector for {t:?}")))
            })
            .collect()
    }
}

/// A recorded completion. Files may also map a digest straight to a string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub text: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawEntry {
    Plain(String),
    Full(FixtureEntry),
}

pub fn load_fixture_file(path: &Path) -> Result<BTreeMap<String, FixtureEntry>, ProviderError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
    if text.trim().is_empty() {
        return Ok(BTreeMap::new());
    }
    let raw: BTreeMap<String, RawEntry> = serde_yaml::from_str(&text)
        .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
    Ok(raw
        .into_iter()
        .map(|(k, v)| {
            let entry = match v {
                RawEntry::Plain(text) => FixtureEntry { scenario: None, text },
                RawEntry::Full(e) => e,
            };
            (k, entry)
        })
        .collect())
}

pub fn save_fixture_file(path: &Path, entries: &BTreeMap<String, FixtureEntry>) -> Result<(), ProviderError> {
    let text = serde_yaml::to_string(entries).map_err(|e| ProviderError::Config(e.to_string()))?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| ProviderError::Config(e.to_string()))?;
    }
    fs::write(path, text).map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CallRecord {
    Complete { digest: String },
    Embed { batch_size: usize },
}

#[derive(Debug, Default)]
struct MockState {
    log: Vec<CallRecord>,
    script: VecDeque<(Option<String>, String)>,
    recorded: BTreeMap<String, FixtureEntry>,
}

/// Deterministic provider: completions replayed by prompt digest, embeddings
/// from [`mock_embed`]. Every call lands in an append-only log.
#[derive(Debug)]
pub struct MockProvider {
    dimension: usize,
    embed_name: String,
    model_name: String,
    strict: bool,
    fixtures: BTreeMap<String, FixtureEntry>,
    state: Mutex<MockState>,
}

#[derive(Debug)]
pub struct MockProviderBuilder {
    dimension: usize,
    model_name: String,
    strict: bool,
    fixtures: BTreeMap<String, FixtureEntry>,
    script: VecDeque<(Option<String>, String)>,
}

impl MockProviderBuilder {
    pub fn dimension(mut self, dimension: usize) -> Self {
        self.dimension = dimension;
        self
    }

    pub fn model_name(mut self, name: &str) -> Self {
        self.model_name = name.to_string();
        self
    }

    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn fixture(mut self, digest: impl Into<String>, text: impl Into<String>) -> Self {
        self.fixtures.insert(
            digest.into(),
            FixtureEntry {
                scenario: None,
                text: text.into(),
            },
        );
        self
    }

    /// Registers `text` as the reply to exactly this prompt.
    pub fn reply(self, prompt: &PromptSpec, text: impl Into<String>) -> Self {
        let digest = prompt.digest();
        self.fixture(digest, text)
    }

    pub fn fixtures(mut self, entries: BTreeMap<String, FixtureEntry>) -> Self {
        self.fixtures.extend(entries);
        self
    }

    pub fn fixture_file(self, path: &Path) -> Result<Self, ProviderError> {
        let entries = load_fixture_file(path)?;
        Ok(self.fixtures(entries))
    }

    /// Queues a reply served, and recorded, for the next prompt with no fixture.
    pub fn script(mut self, scenario: Option<&str>, text: impl Into<String>) -> Self {
        self.script.push_back((scenario.map(str::to_string), text.into()));
        self
    }

    pub fn build(self) -> MockProvider {
        MockProvider {
            dimension: self.dimension,
            embed_name: format!("mock-hash-{}", self.dimension),
            model_name: self.model_name,
            strict: self.strict,
            fixtures: self.fixtures,
            state: Mutex::new(MockState {
                script: self.script,
                ..MockState::default()
            }),
        }
    }
}

impl MockProvider {
    pub fn builder() -> MockProviderBuilder {
        MockProviderBuilder {
            dimension: DEFAULT_MOCK_DIMENSION,
            model_name: "mock-replay".into(),
            strict: true,
            fixtures: BTreeMap::new(),
            script: VecDeque::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn call_log(&self) -> Vec<CallRecord> {
        self.state.lock().log.clone()
    }

    pub fn completion_digests(&self) -> Vec<String> {
        self.state
            .lock()
            .log
            .iter()
            .filter_map(|c| match c {
                CallRecord::Complete { digest } => Some(digest.clone()),
                CallRecord::Embed { .. } => None,
            })
            .collect()
    }

    pub fn embed_batches(&self) -> Vec<usize> {
        self.state
            .lock()
            .log
            .iter()
            .filter_map(|c| match c {
                CallRecord::Embed { batch_size } => Some(*batch_size),
                CallRecord::Complete { .. } => None,
            })
            .collect()
    }

    /// Replies served from the script, keyed by the prompts that consumed them.
    pub fn recorded(&self) -> BTreeMap<String, FixtureEntry> {
        self.state.lock().recorded.clone()
    }
}

impl CompletionModel for MockProvider {
    fn complete(&self, prompt: &PromptSpec) -> Result<CompletionResult, ProviderError> {
        if prompt.user_text.trim().is_empty() {
            return Err(ProviderError::InvalidInput("user_text is empty".into()));
        }
        let digest = prompt.digest();
        let mut state = self.state.lock();
        state.log.push(CallRecord::Complete { digest: digest.clone() });
        let text = if let Some(entry) = self.fixtures.get(&digest) {
            entry.text.clone()
        } else if let Some(entry) = state.recorded.get(&digest) {
            entry.text.clone()
        } else if let Some((scenario, text)) = state.script.pop_front() {
            state.recorded.insert(digest, FixtureEntry { scenario, text: text.clone() });
            text
        } else if self.strict {
            return Err(ProviderError::FixtureMiss { digest });
        } else {
            prompt.user_text.clone()
        };
        let (text, finished) = match prompt.max_output {
            Some(max) if text.chars().count() > max as usize => {
                (text.chars().take(max as usize).collect(), false)
            }
            _ => (text, true),
        };
        Ok(CompletionResult {
            text,
            model_name: self.model_name.clone(),
            finished,
        })
    }
}

impl Embedder for MockProvider {
    #[allow(clippy::misnamed_getters)]
    fn model_name(&self) -> &str {
        &self.embed_name
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError> {
        check_embed_input(texts)?;
        self.state.lock().log.push(CallRecord::Embed { batch_size: texts.len() });
        Ok(texts.iter().map(|t| mock_embed(t, self.dimension)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos(a: &[f32], b: &[f32]) -> f64 {
        a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum()
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn repeated_token_normalises_away() {
        assert_eq!(mock_embed("cat cat", 256), mock_embed("cat", 256));
        assert_eq!(mock_embed("Cat!", 256), mock_embed("cat", 256));
    }

    #[test]
    fn empty_text_is_e0() {
        let v = mock_embed("", 8);
        assert_eq!(v, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(mock_embed(" -- ", 8), v);
    }

    #[test]
    fn shared_tokens_dominate() {
        let a = mock_embed("red raspberry fruit", 256);
        let b = mock_embed("red fruit", 256);
        let c = mock_embed("network protocol", 256);
        assert!(cos(&a, &b) > cos(&a, &c));
    }

    #[test]
    fn replay_strict_echo_and_script() {
        let p = PromptSpec::new("say hello");
        let mock = MockProvider::builder().reply(&p, "hello").build();
        assert_eq!(mock.complete(&p).unwrap().text, "hello");
        let q = PromptSpec::new("unknown");
        assert!(matches!(mock.complete(&q), Err(ProviderError::FixtureMiss { .. })));

        let echo = MockProvider::builder().strict(false).build();
        assert_eq!(echo.complete(&q).unwrap().text, "unknown");

        let rec = MockProvider::builder().script(Some("s1"), "scripted").build();
        assert_eq!(rec.complete(&q).unwrap().text, "scripted");
        assert_eq!(rec.complete(&q).unwrap().text, "scripted");
        assert_eq!(rec.recorded()[&q.digest()].scenario.as_deref(), Some("s1"));
        assert_eq!(rec.completion_digests().len(), 2);
    }

    #[test]
    fn max_output_truncates_and_flags() {
        let p = PromptSpec {
            max_output: Some(3),
            ..PromptSpec::new("abcdef")
        };
        let mock = MockProvider::builder().strict(false).build();
        let r = mock.complete(&p).unwrap();
        assert_eq!(r.text, "abc");
        assert!(!r.finished);
    }

    #[test]
    fn fixture_files_accept_plain_and_full_entries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.yaml");
        fs::write(&path, "abc: plain text\ndef:\n  scenario: s\n  text: full\n").unwrap();
        let entries = load_fixture_file(&path).unwrap();
        assert_eq!(entries["abc"].text, "plain text");
        assert_eq!(entries["def"].scenario.as_deref(), Some("s"));
        save_fixture_file(&path, &entries).unwrap();
        assert_eq!(load_fixture_file(&path).unwrap(), entries);
    }

    #[test]
    fn embed_logs_batches_and_rejects_blank() {
        let mock = MockProvider::builder().dimension(4).build();
        mock.embed(&["a".into(), "b".into()]).unwrap();
        assert_eq!(mock.embed_batches(), vec![2]);
        assert!(mock.embed(&[]).is_err());
        assert!(mock.embed(&["  ".into()]).is_err());
    }
}
