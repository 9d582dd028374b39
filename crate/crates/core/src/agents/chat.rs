use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};

use super::{numbered, AgentContext, AgentError, ContextItem, PromptTrace};

pub const DEFAULT_CHAT_K: usize = 10;

static BRACKETED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[(\d+(?:\s*,\s*\d+)*)\]").unwrap());
// "in cakes 3." and "in cakes.3 "
static BARE_BEFORE_STOP: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"([A-Za-z)]) (\d{1,2})([.!?])(\s|$)").unwrap());
static BARE_AFTER_STOP: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"([A-Za-z)])([.!?;,])(\d{1,2})(\s|$)").unwrap());

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reference {
    pub index: usize,
    pub object_id: String,
    pub rendering: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub body: String,
    /// Cited references, ascending by index.
    pub references: Vec<Reference>,
    pub unresolved_markers: Vec<usize>,
    /// Everything the model was shown, cited or not.
    pub context: Vec<Reference>,
    pub trace: PromptTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatOptions {
    pub k: usize,
    /// Extra background text, e.g. from cart items.
    pub background: Option<String>,
}

impl Default for ChatOptions {
    fn default() -> Self {
        Self {
            k: DEFAULT_CHAT_K,
            background: None,
        }
    }
}

/// Rewrites bare citation numerals that resolve against `context_len` into
/// `[n]` form, then returns the normalized body and every marker in order of
/// appearance.
pub fn extract_markers(body: &str, context_len: usize) -> (String, Vec<usize>) {
    let in_range = |s: &str| s.parse::<usize>().is_ok_and(|n| (1..=context_len).contains(&n));
    let step = BARE_BEFORE_STOP.replace_all(body, |c: &Captures| {
        if in_range(&c[2]) {
            format!("{} [{}]{}{}", &c[1], &c[2], &c[3], &c[4])
        } else {
            c[0].to_string()
        }
    });
    let normalized = BARE_AFTER_STOP
        .replace_all(&step, |c: &Captures| {
            if in_range(&c[3]) {
                format!("{}{} [{}]{}", &c[1], &c[2], &c[3], &c[4])
            } else {
                c[0].to_string()
            }
        })
        .into_owned();
    let markers = BRACKETED
        .captures_iter(&normalized)
        .flat_map(|c| {
            c[1].split(',')
                .filter_map(|n| n.trim().parse::<usize>().ok())
                .collect::<Vec<_>>()
        })
        .collect();
    (normalized, markers)
}

fn gather(ctx: &AgentContext, sources: &[String], question: &str, k: usize) -> Result<Vec<ContextItem>, AgentError> {
    let mut items = Vec::new();
    for source in sources {
        items.extend(ctx.retrieve(source, question, k)?);
    }
    items.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    let mut seen = BTreeSet::new();
    items.retain(|it| seen.insert((it.source.clone(), it.object.id.clone())));
    items.truncate(k);
    Ok(items)
}

/// Answers `question` from the top `k` objects across `sources`, citing them by number.
pub fn agent_chat(ctx: &AgentContext, sources: &[String], question: &str, options: ChatOptions) -> Result<ChatResponse, AgentError> {
    if question.trim().is_empty() {
        return Err(AgentError::InvalidInput("empty question".into()));
    }
    if sources.is_empty() {
        return Err(AgentError::InvalidInput("no collections named".into()));
    }
    if options.k == 0 {
        return Err(AgentError::InvalidInput("k must be at least 1".into()));
    }
    let items = gather(ctx, sources, question, options.k)?;
    if items.is_empty() {
        return Err(AgentError::EmptyContext);
    }
    let context: Vec<Reference> = items
        .iter()
        .enumerate()
        .map(|(i, it)| Reference {
            index: i + 1,
            object_id: it.object.id.clone(),
            rendering: it.rendering.clone(),
        })
        .collect();

    let mut trace = PromptTrace {
        context_ids: context.iter().map(|r| r.object_id.clone()).collect(),
        background: options.background.clone().filter(|b| !b.trim().is_empty()),
        ..Default::default()
    };
    let mut vars = BTreeMap::from([
        ("context", numbered(context.iter().map(|r| r.rendering.clone()))),
        ("question", question.trim().to_string()),
    ]);
    if let Some(bg) = &trace.background {
        vars.insert("background", bg.clone());
    }
    let prompt = ctx.render("chat", &vars, &mut trace)?;
    let reply = ctx.complete(&prompt)?;

    let (body, markers) = extract_markers(reply.text.trim(), context.len());
    let mut cited = BTreeSet::new();
    let mut unresolved = Vec::new();
    for m in markers {
        if (1..=context.len()).contains(&m) {
            cited.insert(m);
        } else if !unresolved.contains(&m) {
            unresolved.push(m);
        }
    }
    Ok(ChatResponse {
        body,
        references: cited.into_iter().map(|i| context[i - 1].clone()).collect(),
        unresolved_markers: unresolved,
        context,
        trace,
    })
}
