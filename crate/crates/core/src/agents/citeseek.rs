use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::chat::Reference;
use super::{numbered, parse_llm_map, AgentContext, AgentError, PromptTrace};

pub const DEFAULT_CITESEEK_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Claim {
    Triple { subject: String, predicate: String, object: String },
    Text(String),
}

impl Claim {
    pub fn triple(subject: &str, predicate: &str, object: &str) -> Self {
        Claim::Triple {
            subject: subject.into(),
            predicate: predicate.into(),
            object: object.into(),
        }
    }

    pub fn text(&self) -> String {
        match self {
            Claim::Text(t) => t.trim().to_string(),
            Claim::Triple { subject, predicate, object } => {
                format!("{} {} {}", subject.trim(), predicate.trim(), object.trim())
            }
        }
    }

    fn validate(&self) -> Result<(), AgentError> {
        let ok = match self {
            Claim::Text(t) => !t.trim().is_empty(),
            Claim::Triple { subject, predicate, object } => [subject, predicate, object].iter().all(|s| !s.trim().is_empty()),
        };
        if ok {
            Ok(())
        } else {
            Err(AgentError::InvalidInput("claim has an empty part".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EvidenceCategory {
    Supports,
    PartiallySupports,
    Refutes,
    NoEvidence,
    Disagrees,
}

impl EvidenceCategory {
    pub fn parse(s: &str) -> Option<Self> {
        let norm: String = s
            .trim()
            .chars()
            .map(|c| if c == ' ' || c == '-' { '_' } else { c.to_ascii_uppercase() })
            .collect();
        Some(match norm.as_str() {
            "SUPPORTS" | "SUPPORT" => Self::Supports,
            "PARTIALLY_SUPPORTS" | "PARTIAL_SUPPORT" => Self::PartiallySupports,
            "REFUTES" | "REFUTE" => Self::Refutes,
            "NO_EVIDENCE" => Self::NoEvidence,
            "DISAGREES" | "DISAGREE" => Self::Disagrees,
            _ => return None,
        })
    }
}

impl fmt::Display for EvidenceCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub reference: Reference,
    pub category: EvidenceCategory,
    pub excerpt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceReport {
    pub claim: String,
    pub summary: String,
    pub verdicts: Vec<Verdict>,
    /// Every record shown to the model.
    pub references: Vec<Reference>,
    pub warnings: Vec<String>,
    pub trace: PromptTrace,
}

fn resolve(value: &Value, refs: &[Reference]) -> Option<usize> {
    let as_index = |n: u64| usize::try_from(n).ok().filter(|i| (1..=refs.len()).contains(i));
    match value {
        Value::Number(n) => n.as_u64().and_then(as_index),
        Value::String(s) => {
            let t = s.trim().trim_start_matches('[').trim_end_matches(']').trim();
            let t = t.strip_prefix("Reference").map(str::trim).unwrap_or(t);
            if let Ok(n) = t.parse::<u64>() {
                return as_index(n);
            }
            refs.iter().position(|r| r.object_id == t).map(|p| p + 1)
        }
        _ => None,
    }
}

fn text_field(map: &serde_json::Map<String, Value>, key: &str) -> String {
    match map.get(key) {
        Some(Value::String(s)) => s.trim().to_string(),
        Some(Value::Null) | None => String::new(),
        Some(other) => other.to_string(),
    }
}

/// Looks for evidence about `claim` in a collection or a dynamic wrapper.
pub fn agent_citeseek(ctx: &AgentContext, claim: &Claim, source: &str, k: usize) -> Result<EvidenceReport, AgentError> {
    claim.validate()?;
    if k == 0 {
        return Err(AgentError::InvalidInput("k must be at least 1".into()));
    }
    let claim_text = claim.text();
    let items = ctx.retrieve(source, &claim_text, k)?;
    let references: Vec<Reference> = items
        .iter()
        .enumerate()
        .map(|(i, it)| Reference {
            index: i + 1,
            object_id: it.object.id.clone(),
            rendering: it.rendering.clone(),
        })
        .collect();
    let mut trace = PromptTrace {
        context_ids: references.iter().map(|r| r.object_id.clone()).collect(),
        ..Default::default()
    };
    if references.is_empty() {
        return Ok(EvidenceReport {
            claim: claim_text,
            summary: format!("No records were found in {source} for this claim."),
            verdicts: Vec::new(),
            references,
            warnings: Vec::new(),
            trace,
        });
    }

    let vars = BTreeMap::from([
        ("claim", claim_text.clone()),
        ("references", numbered(references.iter().map(|r| r.rendering.clone()))),
    ]);
    let prompt = ctx.render("citeseek", &vars, &mut trace)?;
    let reply = ctx.complete(&prompt)?;
    let map = parse_llm_map(&reply.text)?;

    let mut warnings = Vec::new();
    let mut verdicts = Vec::new();
    let entries = match map.get("verdicts") {
        Some(Value::Array(items)) => items.clone(),
        Some(Value::Null) | None => Vec::new(),
        Some(other) => vec![other.clone()],
    };
    for (i, entry) in entries.iter().enumerate() {
        let Value::Object(v) = entry else {
            warnings.push(format!("verdict {} is not a mapping", i + 1));
            continue;
        };
        let Some(index) = v.get("reference").and_then(|r| resolve(r, &references)) else {
            warnings.push(format!("verdict {} cites no retrieved reference", i + 1));
            continue;
        };
        let Some(category) = v.get("category").and_then(Value::as_str).and_then(EvidenceCategory::parse) else {
            warnings.push(format!("verdict {} has an unknown category", i + 1));
            continue;
        };
        verdicts.push(Verdict {
            reference: references[index - 1].clone(),
            category,
            excerpt: text_field(v, "excerpt"),
        });
    }
    Ok(EvidenceReport {
        claim: claim_text,
        summary: text_field(&map, "summary"),
        verdicts,
        references,
        warnings,
        trace,
    })
}
