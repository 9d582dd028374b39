use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};

use super::extract::label_from_identifier;
use super::{extract_block, mint_unique_id, object_from_map, yaml_to_json, AgentContext, AgentError, PromptTrace};
use crate::object::CuratedObject;
use crate::schema::{AttributeSpec, ClassSpec, SchemaSpec, Violation};

/// Starting point for a new knowledge base.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub kb_name: String,
    pub description: String,
    /// A list, or one comma-separated string.
    #[serde(deserialize_with = "list_or_csv")]
    pub attributes: Vec<String>,
    pub main_class: String,
}

fn list_or_csv<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Form {
        List(Vec<String>),
        Csv(String),
    }
    let items = match Form::deserialize(d)? {
        Form::List(v) => v,
        Form::Csv(s) => s.split(',').map(str::to_string).collect(),
    };
    Ok(items.into_iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
}

impl BootstrapConfig {
    pub fn from_yaml(text: &str) -> Result<Self, AgentError> {
        serde_yaml::from_str(text).map_err(|e| AgentError::InvalidInput(format!("bootstrap config: {e}")))
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        for (name, value) in [("kb_name", &self.kb_name), ("description", &self.description), ("main_class", &self.main_class)] {
            if value.trim().is_empty() {
                return Err(AgentError::InvalidInput(format!("bootstrap config: {name} is empty")));
            }
        }
        if self.attributes.is_empty() {
            return Err(AgentError::InvalidInput("bootstrap config: no attributes".into()));
        }
        Ok(())
    }

    fn render(&self) -> String {
        format!(
            "kb_name: {}\ndescription: {}\nattributes: {}\nmain_class: {}",
            self.kb_name,
            self.description,
            self.attributes.join(", "),
            self.main_class
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSchema {
    pub schema: SchemaSpec,
    /// Set when the model's schema needed fixing up.
    pub repaired: bool,
    pub repairs: Vec<String>,
    pub trace: PromptTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInstance {
    pub object: CuratedObject,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapData {
    pub class: String,
    pub instances: Vec<BootstrapInstance>,
    pub warnings: Vec<String>,
    pub trace: PromptTrace,
}

fn unique_class_name(schema: &SchemaSpec, base: &str) -> String {
    if !schema.is_class(base) {
        return base.to_string();
    }
    (2..).map(|n| format!("{base}{n}")).find(|c| !schema.is_class(c)).expect("unbounded")
}

/// Ensures the main class exists with every configured attribute and that the
/// root class holds a list of main-class members. Returns what was changed;
/// repairing a repaired schema changes nothing.
pub fn repair_schema(schema: &mut SchemaSpec, config: &BootstrapConfig) -> Vec<String> {
    let mut repairs = Vec::new();
    let main = config.main_class.trim();
    if !schema.is_class(main) {
        schema.classes.push(ClassSpec {
            name: main.to_string(),
            description: String::new(),
            attributes: vec![AttributeSpec {
                required: true,
                identifier: true,
                ..AttributeSpec::string("name")
            }],
        });
        repairs.push(format!("added missing class {main}"));
    }
    let class = schema.class_mut(main).expect("present");
    for attr in &config.attributes {
        if class.attribute(attr).is_none() {
            class.attributes.push(AttributeSpec::string(attr.clone()));
            repairs.push(format!("added attribute {main}.{attr}"));
        }
    }

    let holds_members = |s: &SchemaSpec| {
        s.class(&s.root_class)
            .is_some_and(|r| r.name != main && r.attributes.iter().any(|a| a.multivalued && a.range == main))
    };
    if !holds_members(schema) {
        let root_usable = schema.is_class(&schema.root_class) && schema.root_class != main;
        let members = AttributeSpec {
            range: main.to_string(),
            multivalued: true,
            ..AttributeSpec::string("members")
        };
        if root_usable {
            let root_name = schema.root_class.clone();
            let root = schema.class_mut(&root_name).expect("present");
            let name = if root.attribute("members").is_some() {
                (2..).map(|n| format!("members{n}")).find(|n| root.attribute(n).is_none()).expect("unbounded")
            } else {
                "members".to_string()
            };
            root.attributes.push(AttributeSpec { name: name.clone(), ..members });
            repairs.push(format!("root class {root_name} given a {name} list of {main}"));
        } else {
            let name = unique_class_name(schema, "Container");
            schema.classes.insert(
                0,
                ClassSpec {
                    name: name.clone(),
                    description: String::new(),
                    attributes: vec![members],
                },
            );
            schema.root_class = name.clone();
            repairs.push(format!("added root class {name} holding {main} members"));
        }
    }
    repairs
}

/// Asks the model for a schema matching `config`, then repairs and checks it.
pub fn agent_bootstrap_schema(ctx: &AgentContext, config: &BootstrapConfig) -> Result<BootstrapSchema, AgentError> {
    config.validate()?;
    let mut trace = PromptTrace::default();
    let prompt = ctx.render("bootstrap_schema", &BTreeMap::from([("config", config.render())]), &mut trace)?;
    let reply = ctx.complete(&prompt)?;
    let block = extract_block(&reply.text).ok_or_else(|| AgentError::Unparseable("no schema in reply".into()))?;
    let mut schema = SchemaSpec::from_yaml(&block).map_err(|e| AgentError::Unparseable(e.to_string()))?;
    if schema.classes.is_empty() {
        return Err(AgentError::Unparseable("schema has no classes".into()));
    }
    if schema.name.trim().is_empty() {
        schema.name = config.kb_name.clone();
    }
    if schema.description.trim().is_empty() {
        schema.description = config.description.clone();
    }
    let repairs = repair_schema(&mut schema, config);
    let issues = schema.validate();
    if !issues.is_empty() {
        return Err(AgentError::InvalidSchema(issues));
    }
    Ok(BootstrapSchema {
        schema,
        repaired: !repairs.is_empty(),
        repairs,
        trace,
    })
}

/// The YAML part of a reply: the fenced block, else everything from the first
/// document marker or field line.
fn data_block(text: &str) -> String {
    if text.contains("```") {
        return extract_block(text).unwrap_or_default();
    }
    let lines: Vec<&str> = text.lines().collect();
    let start = lines
        .iter()
        .position(|l| {
            let key = l.split_once(':').map(|(k, _)| k).unwrap_or_default();
            l.trim_end() == "---" || (!key.is_empty() && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
        })
        .unwrap_or(lines.len());
    lines[start..].join("\n")
}

fn documents(text: &str) -> Result<Vec<Value>, AgentError> {
    let mut out = Vec::new();
    for doc in serde_yaml::Deserializer::from_str(&data_block(text)) {
        let value = serde_yaml::Value::deserialize(doc).map_err(|e| AgentError::Unparseable(e.to_string()))?;
        match yaml_to_json(value) {
            Value::Null => {}
            Value::Array(items) => out.extend(items),
            other => out.push(other),
        }
    }
    Ok(out)
}

/// Generates `count` example members of the schema's main class and checks each.
pub fn agent_bootstrap_data(ctx: &AgentContext, schema: &SchemaSpec, count: usize) -> Result<BootstrapData, AgentError> {
    if count == 0 {
        return Err(AgentError::InvalidInput("count must be at least 1".into()));
    }
    let issues = schema.validate();
    if !issues.is_empty() {
        return Err(AgentError::InvalidSchema(issues));
    }
    let class = schema.member_class().cloned().expect("validated schema has a root");
    let root = schema.class(&schema.root_class).expect("validated");
    let member_attr = root
        .attributes
        .iter()
        .find(|a| a.multivalued && a.range == class.name)
        .map(|a| a.name.clone());

    let mut trace = PromptTrace::default();
    let vars = BTreeMap::from([
        ("schema", schema.to_yaml()),
        ("count", count.to_string()),
        ("class", class.name.clone()),
    ]);
    let prompt = ctx.render("bootstrap_data", &vars, &mut trace)?;
    let reply = ctx.complete(&prompt)?;

    let mut entries = Vec::new();
    for doc in documents(&reply.text)? {
        // A whole container document is unwrapped into its members.
        let unwrapped = match (&doc, &member_attr) {
            (Value::Object(m), Some(attr)) if m.len() == 1 && m.get(attr).is_some_and(Value::is_array) => {
                m[attr].as_array().cloned()
            }
            _ => None,
        };
        match unwrapped {
            Some(items) => entries.extend(items),
            None => entries.push(doc),
        }
    }
    if entries.is_empty() {
        return Err(AgentError::Unparseable("no instances in reply".into()));
    }

    let mut warnings = Vec::new();
    if entries.len() != count {
        warnings.push(format!("asked for {count} instances, got {}", entries.len()));
    }
    let mut taken = HashSet::new();
    let mut instances = Vec::new();
    for (i, entry) in entries.into_iter().enumerate() {
        let Value::Object(mut map) = entry.clone() else {
            warnings.push(format!("instance {} is not a mapping", i + 1));
            continue;
        };
        let violations = schema.validate_instance(&class.name, &entry);
        label_from_identifier(&mut map, &class);
        if map.get("id").is_none_or(Value::is_null) {
            if let Some(label) = map.get("label").and_then(Value::as_str).map(str::to_string) {
                map.insert("id".into(), Value::String(mint_unique_id(&label, |c| taken.contains(c))?));
            }
        }
        let object = object_from_map(Map::clone(&map))?;
        taken.insert(object.id.clone());
        instances.push(BootstrapInstance { object, violations });
    }
    Ok(BootstrapData {
        class: class.name,
        instances,
        warnings,
        trace,
    })
}
