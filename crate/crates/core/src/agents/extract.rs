use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::curate::finish_object;
use super::{numbered, parse_llm_map, AgentContext, AgentError, PromptTrace};
use crate::object::CuratedObject;
use crate::schema::{ClassSpec, SchemaSpec, Violation};

/// Most exemplars shown to the model in any extraction mode.
pub const BASIC_EXEMPLAR_CAP: usize = 20;
/// Levels of nesting RECURSIVE extraction descends: the object and its parts.
pub const RECURSION_DEPTH: usize = 2;
const BACKGROUND_ITEMS: usize = 3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExtractStrategy {
    #[default]
    Basic,
    SchemaFunction,
    Recursive,
}

impl std::str::FromStr for ExtractStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "BASIC" => Ok(Self::Basic),
            "SCHEMA_FUNCTION" => Ok(Self::SchemaFunction),
            "RECURSIVE" => Ok(Self::Recursive),
            other => Err(format!("unknown extraction strategy {other}")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractOptions {
    pub strategy: ExtractStrategy,
    pub instructions: Option<String>,
    /// Collection or wrapper searched for background records.
    pub background_source: Option<String>,
    /// Background supplied by the caller.
    pub background: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractOutcome {
    pub object: CuratedObject,
    /// Schema violations of the extracted object; empty for BASIC.
    pub violations: Vec<Violation>,
    pub exemplar_ids: Vec<String>,
    pub warnings: Vec<String>,
    pub trace: PromptTrace,
}

fn attribute_line(schema: &SchemaSpec, attr: &crate::schema::AttributeSpec) -> String {
    let mut line = format!("- {}: {}", attr.name, attr.range);
    if attr.multivalued {
        line.push_str(", list");
    }
    if attr.required || attr.identifier {
        line.push_str(", required");
    }
    if let Some(e) = schema.enumeration(&attr.range) {
        line.push_str(&format!(", one of {}", e.permissible_values.join(" | ")));
    }
    if let Some(d) = attr.description.as_deref().filter(|d| !d.is_empty()) {
        line.push_str(&format!(" ({d})"));
    }
    line
}

/// Field list for `class`; class-ranged attributes expand their own fields
/// indented below them while `depth` allows.
pub(crate) fn field_list(schema: &SchemaSpec, class: &ClassSpec, depth: usize, skip_nested: bool) -> String {
    let mut lines = Vec::new();
    for attr in &class.attributes {
        let nested = schema.class(&attr.range);
        if skip_nested && nested.is_some() {
            continue;
        }
        lines.push(attribute_line(schema, attr));
        if let Some(inner) = nested.filter(|_| depth > 1) {
            for l in field_list(schema, inner, depth - 1, false).lines() {
                lines.push(format!("  {l}"));
            }
        }
    }
    lines.join("\n")
}

/// Uses the class identifier value as label when the reply has neither id nor label.
pub(crate) fn label_from_identifier(map: &mut Map<String, Value>, class: &ClassSpec) {
    let has = |m: &Map<String, Value>, k: &str| m.get(k).is_some_and(|v| !v.is_null());
    if has(map, "id") || has(map, "label") {
        return;
    }
    let value = class
        .identifier()
        .or_else(|| class.attribute("name"))
        .and_then(|a| map.get(&a.name))
        .and_then(|v| match v {
            Value::String(s) => Some(s.clone()),
            Value::Number(n) => Some(n.to_string()),
            _ => None,
        });
    if let Some(v) = value {
        map.insert("label".into(), Value::String(v));
    }
}

fn target_class(schema: &SchemaSpec) -> Result<ClassSpec, AgentError> {
    schema
        .member_class()
        .cloned()
        .ok_or_else(|| AgentError::Precondition("schema has no root class".into()))
}

/// Extracts one object of the collection's shape from free text.
pub fn agent_extract(ctx: &AgentContext, collection: &str, text: &str, options: ExtractOptions) -> Result<ExtractOutcome, AgentError> {
    if text.trim().is_empty() {
        return Err(AgentError::InvalidInput("empty text".into()));
    }
    let schema = {
        let handle = ctx.store.get(collection)?;
        let coll = handle.read();
        coll.schema().cloned()
    };
    let schema = match (options.strategy, schema) {
        (ExtractStrategy::Basic, _) => None,
        (_, Some(s)) => Some(s),
        (strategy, None) => {
            return Err(AgentError::Precondition(format!(
                "{strategy:?} extraction needs a schema on collection {collection}"
            )))
        }
    };
    let class = schema.as_ref().map(target_class).transpose()?;

    let mut warnings = Vec::new();
    let exemplars = ctx.retrieve(collection, text, BASIC_EXEMPLAR_CAP)?;
    if exemplars.is_empty() {
        warnings.push(format!("collection {collection} is empty; no exemplars used"));
    }
    let mut trace = PromptTrace {
        exemplar_ids: exemplars.iter().map(|e| e.object.id.clone()).collect(),
        ..Default::default()
    };

    let mut background: Vec<String> = options.background.iter().filter(|b| !b.trim().is_empty()).cloned().collect();
    if let Some(source) = &options.background_source {
        let items = ctx.retrieve(source, text, BACKGROUND_ITEMS)?;
        trace.context_ids = items.iter().map(|i| i.object.id.clone()).collect();
        background.extend(items.into_iter().map(|i| i.rendering));
    }
    trace.background = Some(background.join("\n\n")).filter(|b| !b.is_empty());
    let instructions = options.instructions.as_ref().map(|i| i.trim().to_string()).filter(|i| !i.is_empty());

    let recursive = options.strategy == ExtractStrategy::Recursive;
    let schema_text = match (&schema, &class) {
        (Some(s), Some(c)) => field_list(s, c, RECURSION_DEPTH, recursive),
        _ => String::new(),
    };
    let mut vars = BTreeMap::from([
        ("text", text.trim().to_string()),
        ("exemplars", numbered(exemplars.iter().map(|e| e.rendering.clone()))),
        ("schema", schema_text),
        ("background", trace.background.clone().unwrap_or_default()),
    ]);
    if let Some(i) = &instructions {
        vars.insert("instructions", i.clone());
    }
    let prompt = ctx.render("extract", &vars, &mut trace)?;
    let reply = ctx.complete(&prompt)?;
    let mut map = parse_llm_map(&reply.text)?;

    if let (true, Some(schema), Some(class)) = (recursive, &schema, &class) {
        for attr in class.attributes.iter().filter(|a| schema.is_class(&a.range)) {
            let part_class = schema.class(&attr.range).expect("checked");
            let mut vars = BTreeMap::from([
                ("attribute", attr.name.clone()),
                ("shape", if attr.multivalued { "list" } else { "single object" }.to_string()),
                ("class", part_class.name.clone()),
                ("fields", field_list(schema, part_class, RECURSION_DEPTH - 1, false)),
                ("text", text.trim().to_string()),
            ]);
            if let Some(i) = &instructions {
                vars.insert("instructions", i.clone());
            }
            let prompt = ctx.render("extract_attribute", &vars, &mut trace)?;
            let reply = ctx.complete(&prompt)?;
            let mut part = match parse_llm_map(&reply.text) {
                Ok(p) => p,
                Err(e) => {
                    warnings.push(format!("attribute {}: {e}", attr.name));
                    continue;
                }
            };
            let value = match part.remove(&attr.name) {
                Some(v) => v,
                None if part.len() == 1 => part.into_iter().next().expect("one entry").1,
                None => Value::Object(part),
            };
            if !value.is_null() {
                map.insert(attr.name.clone(), value);
            }
        }
    }

    if let Some(class) = &class {
        label_from_identifier(&mut map, class);
    }
    let object = finish_object(ctx, collection, map, None)?;
    let violations = match (&schema, &class) {
        (Some(s), Some(c)) => s.validate_instance(&c.name, &object.to_value()),
        _ => Vec::new(),
    };
    Ok(ExtractOutcome {
        object,
        violations,
        exemplar_ids: trace.exemplar_ids.clone(),
        warnings,
        trace,
    })
}
