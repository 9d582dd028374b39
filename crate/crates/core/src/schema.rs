//! A reduced class/attribute/enum schema dialect.
//!
//! Schemas are read from and written to a LinkML-flavoured YAML layout:
//! `classes` maps class names to `attributes`, `enums` maps enum names to
//! `permissible_values`, and the class marked `tree_root: true` is the root.
//! Prefixes, imports and other keys are accepted and ignored.

use std::collections::BTreeSet;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const SCALAR_TYPES: &[&str] = &[
    "string", "integer", "float", "double", "decimal", "boolean", "date", "datetime", "uri", "uriorcurie",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    #[serde(default = "default_range")]
    pub range: String,
    #[serde(default)]
    pub required: bool,
    #[serde(default)]
    pub identifier: bool,
    #[serde(default)]
    pub multivalued: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

fn default_range() -> String {
    "string".into()
}

impl AttributeSpec {
    pub fn string(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            range: default_range(),
            required: false,
            identifier: false,
            multivalued: false,
            description: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub attributes: Vec<AttributeSpec>,
}

impl ClassSpec {
    pub fn attribute(&self, name: &str) -> Option<&AttributeSpec> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn identifier(&self) -> Option<&AttributeSpec> {
        self.attributes.iter().find(|a| a.identifier)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumSpec {
    pub name: String,
    pub permissible_values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SchemaSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub classes: Vec<ClassSpec>,
    #[serde(default)]
    pub enums: Vec<EnumSpec>,
    #[serde(default)]
    pub root_class: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("schema is not valid YAML: {0}")]
    Yaml(String),
    #[error("schema document is malformed: {0}")]
    Malformed(String),
}

/// A schema-level problem found by [`SchemaSpec::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemaIssue {
    MissingRoot { root_class: String },
    DuplicateClass { class: String },
    DanglingRange { class: String, attribute: String, range: String },
    MultipleIdentifiers { class: String },
    EmptyEnum { name: String },
}

impl fmt::Display for SchemaIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemaIssue::MissingRoot { root_class } if root_class.is_empty() => write!(f, "no root class"),
            SchemaIssue::MissingRoot { root_class } => write!(f, "root class {root_class} is not defined"),
            SchemaIssue::DuplicateClass { class } => write!(f, "class {class} is defined twice"),
            SchemaIssue::DanglingRange { class, attribute, range } => {
                write!(f, "{class}.{attribute} has unknown range {range}")
            }
            SchemaIssue::MultipleIdentifiers { class } => write!(f, "class {class} has several identifiers"),
            SchemaIssue::EmptyEnum { name } => write!(f, "enum {name} has no permissible values"),
        }
    }
}

/// An instance-level problem found by [`SchemaSpec::validate_instance`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Dotted path to the offending value, e.g. `side_effects[1].severity`.
    pub path: String,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    MissingRequired,
    ExpectedList,
    UnexpectedList,
    ExpectedObject { class: String },
    EnumValue { value: String, allowed: Vec<String> },
    TypeMismatch { expected: String },
    UnknownClass { class: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::MissingRequired => write!(f, "{}: required value missing", self.path),
            ViolationKind::ExpectedList => write!(f, "{}: expected a list", self.path),
            ViolationKind::UnexpectedList => write!(f, "{}: expected a single value", self.path),
            ViolationKind::ExpectedObject { class } => write!(f, "{}: expected a {class} object", self.path),
            ViolationKind::EnumValue { value, allowed } => {
                write!(f, "{}: {value:?} is not one of {}", self.path, allowed.join(", "))
            }
            ViolationKind::TypeMismatch { expected } => write!(f, "{}: expected {expected}", self.path),
            ViolationKind::UnknownClass { class } => write!(f, "{}: unknown class {class}", self.path),
        }
    }
}

impl SchemaSpec {
    pub fn class(&self, name: &str) -> Option<&ClassSpec> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn class_mut(&mut self, name: &str) -> Option<&mut ClassSpec> {
        self.classes.iter_mut().find(|c| c.name == name)
    }

    pub fn enumeration(&self, name: &str) -> Option<&EnumSpec> {
        self.enums.iter().find(|e| e.name == name)
    }

    pub fn is_class(&self, name: &str) -> bool {
        self.class(name).is_some()
    }

    /// The class whose instances make up a collection: the range of the
    /// root's multivalued class-ranged attribute, or the root itself.
    pub fn member_class(&self) -> Option<&ClassSpec> {
        let root = self.class(&self.root_class)?;
        root.attributes
            .iter()
            .find(|a| a.multivalued && self.is_class(&a.range))
            .and_then(|a| self.class(&a.range))
            .or(Some(root))
    }

    pub fn validate(&self) -> Vec<SchemaIssue> {
        let mut issues = Vec::new();
        if !self.is_class(&self.root_class) {
            issues.push(SchemaIssue::MissingRoot {
                root_class: self.root_class.clone(),
            });
        }
        let mut seen = BTreeSet::new();
        for class in &self.classes {
            if !seen.insert(class.name.as_str()) {
                issues.push(SchemaIssue::DuplicateClass {
                    class: class.name.clone(),
                });
            }
            if class.attributes.iter().filter(|a| a.identifier).count() > 1 {
                issues.push(SchemaIssue::MultipleIdentifiers {
                    class: class.name.clone(),
                });
            }
            for attr in &class.attributes {
                let known = SCALAR_TYPES.contains(&attr.range.as_str())
                    || self.is_class(&attr.range)
                    || self.enumeration(&attr.range).is_some();
                if !known {
                    issues.push(SchemaIssue::DanglingRange {
                        class: class.name.clone(),
                        attribute: attr.name.clone(),
                        range: attr.range.clone(),
                    });
                }
            }
        }
        for e in &self.enums {
            if e.permissible_values.is_empty() {
                issues.push(SchemaIssue::EmptyEnum { name: e.name.clone() });
            }
        }
        issues
    }

    /// Checks `value` as an instance of `class`. Fields the class does not
    /// declare are ignored.
    pub fn validate_instance(&self, class: &str, value: &Value) -> Vec<Violation> {
        let mut out = Vec::new();
        self.check_object(class, value, "", &mut out);
        out
    }

    fn check_object(&self, class: &str, value: &Value, path: &str, out: &mut Vec<Violation>) {
        let Some(spec) = self.class(class) else {
            out.push(violation(path, ViolationKind::UnknownClass { class: class.into() }));
            return;
        };
        let Some(map) = value.as_object() else {
            out.push(violation(path, ViolationKind::ExpectedObject { class: class.into() }));
            return;
        };
        for attr in &spec.attributes {
            let here = join(path, &attr.name);
            let present = map.get(&attr.name).filter(|v| !v.is_null());
            let Some(v) = present else {
                if attr.required || attr.identifier {
                    out.push(violation(&here, ViolationKind::MissingRequired));
                }
                continue;
            };
            match (attr.multivalued, v.as_array()) {
                (true, Some(items)) => {
                    if items.is_empty() && attr.required {
                        out.push(violation(&here, ViolationKind::MissingRequired));
                    }
                    for (i, item) in items.iter().enumerate() {
                        self.check_value(attr, item, &format!("{here}[{i}]"), out);
                    }
                }
                (true, None) => out.push(violation(&here, ViolationKind::ExpectedList)),
                (false, Some(_)) => out.push(violation(&here, ViolationKind::UnexpectedList)),
                (false, None) => self.check_value(attr, v, &here, out),
            }
        }
    }

    fn check_value(&self, attr: &AttributeSpec, v: &Value, path: &str, out: &mut Vec<Violation>) {
        if self.is_class(&attr.range) {
            self.check_object(&attr.range, v, path, out);
        } else if let Some(e) = self.enumeration(&attr.range) {
            let text = scalar_string(v);
            if !text.as_ref().is_some_and(|t| e.permissible_values.contains(t)) {
                out.push(violation(
                    path,
                    ViolationKind::EnumValue {
                        value: text.unwrap_or_else(|| v.to_string()),
                        allowed: e.permissible_values.clone(),
                    },
                ));
            }
        } else if !scalar_matches(&attr.range, v) {
            out.push(violation(
                path,
                ViolationKind::TypeMismatch {
                    expected: attr.range.clone(),
                },
            ));
        }
    }

    pub fn from_yaml(text: &str) -> Result<Self, SchemaError> {
        let doc: serde_yaml::Value = serde_yaml::from_str(text).map_err(|e| SchemaError::Yaml(e.to_string()))?;
        Self::from_yaml_value(&doc)
    }

    pub fn from_yaml_value(doc: &serde_yaml::Value) -> Result<Self, SchemaError> {
        let raw: RawSchema =
            serde_yaml::from_value(doc.clone()).map_err(|e| SchemaError::Malformed(e.to_string()))?;
        let mut root_class = String::new();
        let classes = raw
            .classes
            .into_iter()
            .map(|(name, c)| {
                let c = c.unwrap_or_default();
                if c.tree_root && root_class.is_empty() {
                    root_class = name.clone();
                }
                ClassSpec {
                    name,
                    description: c.description.unwrap_or_default(),
                    attributes: c
                        .attributes
                        .into_iter()
                        .map(|(attr_name, a)| {
                            let a = a.unwrap_or_default();
                            AttributeSpec {
                                name: attr_name,
                                range: a.range.unwrap_or_else(default_range),
                                required: a.required,
                                identifier: a.identifier,
                                multivalued: a.multivalued,
                                description: a.description,
                            }
                        })
                        .collect(),
                }
            })
            .collect();
        let enums = raw
            .enums
            .into_iter()
            .map(|(name, e)| EnumSpec {
                name,
                permissible_values: e.map(|e| e.permissible_values.into_names()).unwrap_or_default(),
            })
            .collect();
        Ok(Self {
            id: raw.id,
            name: raw.name.unwrap_or_default(),
            description: raw.description.unwrap_or_default(),
            classes,
            enums,
            root_class,
        })
    }

    /// Renders the schema back into the YAML dialect read by [`SchemaSpec::from_yaml`].
    pub fn to_yaml(&self) -> String {
        let mut classes = IndexMap::new();
        for class in &self.classes {
            let attributes = class
                .attributes
                .iter()
                .map(|a| {
                    (
                        a.name.clone(),
                        Some(RawAttribute {
                            range: Some(a.range.clone()),
                            required: a.required,
                            identifier: a.identifier,
                            multivalued: a.multivalued,
                            inlined_as_list: a.multivalued && self.is_class(&a.range),
                            description: a.description.clone(),
                        }),
                    )
                })
                .collect();
            classes.insert(
                class.name.clone(),
                Some(RawClass {
                    tree_root: class.name == self.root_class,
                    description: (!class.description.is_empty()).then(|| class.description.clone()),
                    attributes,
                }),
            );
        }
        let enums = self
            .enums
            .iter()
            .map(|e| {
                let values = e
                    .permissible_values
                    .iter()
                    .map(|v| (v.clone(), serde_yaml::Value::Mapping(Default::default())))
                    .collect();
                (
                    e.name.clone(),
                    Some(RawEnum {
                        permissible_values: PermissibleValues::Map(values),
                    }),
                )
            })
            .collect();
        let raw = RawSchema {
            id: self.id.clone(),
            name: Some(self.name.clone()),
            description: (!self.description.is_empty()).then(|| self.description.clone()),
            classes,
            enums,
        };
        serde_yaml::to_string(&raw).expect("schema serializes")
    }
}

fn violation(path: &str, kind: ViolationKind) -> Violation {
    Violation {
        path: if path.is_empty() { "$".into() } else { path.into() },
        kind,
    }
}

fn join(path: &str, name: &str) -> String {
    if path.is_empty() {
        name.to_string()
    } else {
        format!("{path}.{name}")
    }
}

fn scalar_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn scalar_matches(range: &str, v: &Value) -> bool {
    match range {
        "integer" => v.as_i64().is_some() || v.as_u64().is_some(),
        "float" | "double" | "decimal" => v.is_number(),
        "boolean" => v.is_boolean(),
        // Plain YAML scalars such as years parse as numbers; text ranges accept them.
        _ => matches!(v, Value::String(_) | Value::Number(_) | Value::Bool(_)),
    }
}

#[derive(Serialize, Deserialize, Default)]
struct RawSchema {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    #[serde(default)]
    classes: IndexMap<String, Option<RawClass>>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    enums: IndexMap<String, Option<RawEnum>>,
}

#[derive(Serialize, Deserialize, Default)]
struct RawClass {
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    tree_root: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    #[serde(default)]
    attributes: IndexMap<String, Option<RawAttribute>>,
}

#[derive(Serialize, Deserialize, Default)]
struct RawAttribute {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    range: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    required: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    identifier: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    multivalued: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    inlined_as_list: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct RawEnum {
    #[serde(default)]
    permissible_values: PermissibleValues,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PermissibleValues {
    Map(IndexMap<String, serde_yaml::Value>),
    List(Vec<String>),
}

impl Default for PermissibleValues {
    fn default() -> Self {
        PermissibleValues::List(Vec::new())
    }
}

impl PermissibleValues {
    fn into_names(self) -> Vec<String> {
        match self {
            PermissibleValues::Map(m) => m.into_keys().collect(),
            PermissibleValues::List(l) => l,
        }
    }
}
