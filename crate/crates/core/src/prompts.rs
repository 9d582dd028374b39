//! Versioned prompt templates.
//!
//! A template file starts with `# template:` and `# version:` header lines,
//! followed by an optional `[system]` section and a `[user]` section.
//! `{{name}}` is replaced by a variable; `{{#name}}...{{/name}}` is kept only
//! when `name` is set and non-empty. Unknown placeholders are errors.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::providers::PromptSpec;

const BUILTIN: &[(&str, &str)] = &[
    ("background", include_str!("../prompts/background.txt")),
    ("bootstrap_data", include_str!("../prompts/bootstrap_data.txt")),
    ("bootstrap_schema", include_str!("../prompts/bootstrap_schema.txt")),
    ("chat", include_str!("../prompts/chat.txt")),
    ("citeseek", include_str!("../prompts/citeseek.txt")),
    ("curate", include_str!("../prompts/curate.txt")),
    ("decompose", include_str!("../prompts/decompose.txt")),
    ("extract", include_str!("../prompts/extract.txt")),
    ("extract_attribute", include_str!("../prompts/extract_attribute.txt")),
    ("match", include_str!("../prompts/match.txt")),
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("unknown template {0}")]
    Unknown(String),
    #[error("template {name}: {message}")]
    Malformed { name: String, message: String },
    #[error("template {name} references unset placeholder {placeholder}")]
    MissingVariable { name: String, placeholder: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub name: String,
    pub version: u32,
    system: Option<String>,
    user: String,
}

impl Template {
    pub fn parse(name: &str, text: &str) -> Result<Self, TemplateError> {
        let malformed = |message: &str| TemplateError::Malformed {
            name: name.to_string(),
            message: message.to_string(),
        };
        let mut version = None;
        let mut declared = None;
        let mut section: Option<&str> = None;
        let mut system = Vec::new();
        let mut user = Vec::new();
        for line in text.lines() {
            if section.is_none() {
                if let Some(v) = line.strip_prefix("# version:") {
                    version = Some(v.trim().parse::<u32>().map_err(|_| malformed("bad version"))?);
                    continue;
                }
                if let Some(v) = line.strip_prefix("# template:") {
                    declared = Some(v.trim().to_string());
                    continue;
                }
            }
            match line.trim_end() {
                "[system]" => section = Some("system"),
                "[user]" => section = Some("user"),
                _ => match section {
                    Some("system") => system.push(line),
                    Some(_) => user.push(line),
                    None if line.trim().is_empty() || line.starts_with('#') => {}
                    None => return Err(malformed("text before the first section")),
                },
            }
        }
        if declared.as_deref() != Some(name) {
            return Err(malformed("header names a different template"));
        }
        let trim = |lines: Vec<&str>| lines.join("\n").trim().to_string();
        let user = trim(user);
        if user.is_empty() {
            return Err(malformed("empty [user] section"));
        }
        let system = Some(trim(system)).filter(|s| !s.is_empty());
        Ok(Self {
            name: name.to_string(),
            version: version.ok_or_else(|| malformed("missing version header"))?,
            system,
            user,
        })
    }

    pub fn render(&self, vars: &BTreeMap<&str, String>, model_name: &str) -> Result<PromptSpec, TemplateError> {
        let user = self.fill(&self.user, vars)?;
        let system = self.system.as_ref().map(|s| self.fill(s, vars)).transpose()?;
        Ok(PromptSpec {
            system_text: system,
            user_text: user,
            temperature: 0.0,
            max_output: None,
            model_name: model_name.to_string(),
        })
    }

    fn fill(&self, text: &str, vars: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
        let set = |name: &str| vars.get(name).is_some_and(|v| !v.trim().is_empty());
        let mut out = String::with_capacity(text.len());
        let mut rest = text;
        while let Some(open) = rest.find("{{") {
            out.push_str(&rest[..open]);
            let after = &rest[open + 2..];
            let close = after.find("}}").ok_or_else(|| TemplateError::Malformed {
                name: self.name.clone(),
                message: "unclosed placeholder".into(),
            })?;
            let tag = after[..close].trim();
            rest = &after[close + 2..];
            if let Some(section) = tag.strip_prefix('#') {
                let end_tag = format!("{{{{/{section}}}}}");
                let end = rest.find(&end_tag).ok_or_else(|| TemplateError::Malformed {
                    name: self.name.clone(),
                    message: format!("section {section} is not closed"),
                })?;
                if set(section) {
                    let inner = &rest[..end];
                    out.push_str(&self.fill(inner.strip_prefix('\n').unwrap_or(inner), vars)?);
                }
                // Tags on their own lines leave no blank line behind.
                rest = &rest[end + end_tag.len()..];
                rest = rest.strip_prefix('\n').unwrap_or(rest);
            } else {
                let value = vars.get(tag).ok_or_else(|| TemplateError::MissingVariable {
                    name: self.name.clone(),
                    placeholder: tag.to_string(),
                })?;
                out.push_str(value);
            }
        }
        out.push_str(rest);
        Ok(out)
    }
}

/// The template set agents render prompts from.
#[derive(Debug, Clone)]
pub struct PromptLibrary {
    templates: BTreeMap<String, Template>,
}

impl PromptLibrary {
    pub fn builtin() -> Self {
        let templates = BUILTIN
            .iter()
            .map(|(name, text)| {
                let t = Template::parse(name, text).expect("built-in templates parse");
                (name.to_string(), t)
            })
            .collect();
        Self { templates }
    }

    /// Built-ins overridden by any `<name>.txt` found in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self, TemplateError> {
        let mut lib = Self::builtin();
        let names: Vec<String> = lib.templates.keys().cloned().collect();
        for name in names {
            let path = dir.join(format!("{name}.txt"));
            if let Ok(text) = fs::read_to_string(&path) {
                lib.templates.insert(name.clone(), Template::parse(&name, &text)?);
            }
        }
        Ok(lib)
    }

    pub fn get(&self, name: &str) -> Result<&Template, TemplateError> {
        self.templates.get(name).ok_or_else(|| TemplateError::Unknown(name.to_string()))
    }

    pub fn versions(&self) -> BTreeMap<String, u32> {
        self.templates.iter().map(|(k, t)| (k.clone(), t.version)).collect()
    }
}

impl Default for PromptLibrary {
    fn default() -> Self {
        Self::builtin()
    }
}
