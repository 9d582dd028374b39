use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::SourceError;
use crate::agents::{mint_unique_id, object_from_map, yaml_to_json};
use crate::object::CuratedObject;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlatFormat {
    Json,
    Yaml,
    Csv,
    Tsv,
}

impl FlatFormat {
    pub fn from_extension(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "json" => Some(Self::Json),
            "yaml" | "yml" => Some(Self::Yaml),
            "csv" => Some(Self::Csv),
            "tsv" | "tab" => Some(Self::Tsv),
            _ => None,
        }
    }
}

impl std::str::FromStr for FlatFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "yaml" | "yml" => Ok(Self::Yaml),
            "csv" => Ok(Self::Csv),
            "tsv" => Ok(Self::Tsv),
            other => Err(format!("unknown flat format {other}")),
        }
    }
}

/// Loads one object per row or list entry. In delimited files `aliases` is
/// split on `|` and `relationships` holds `predicate:target` pairs split on `|`.
pub fn load_flat(path: &Path, format: FlatFormat, id_field: &str, label_field: &str) -> Result<Vec<CuratedObject>, SourceError> {
    let text = std::fs::read_to_string(path).map_err(|e| SourceError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    load_flat_str(&text, format, id_field, label_field)
}

pub fn load_flat_str(text: &str, format: FlatFormat, id_field: &str, label_field: &str) -> Result<Vec<CuratedObject>, SourceError> {
    let rows = match format {
        FlatFormat::Json => {
            let v: Value = serde_json::from_str(text).map_err(|e| SourceError::parse("JSON data", e))?;
            entries(v, "JSON data")?
        }
        FlatFormat::Yaml => {
            let v: serde_yaml::Value = serde_yaml::from_str(text).map_err(|e| SourceError::parse("YAML data", e))?;
            entries(yaml_to_json(v), "YAML data")?
        }
        FlatFormat::Csv => delimited(text, b',')?,
        FlatFormat::Tsv => delimited(text, b'\t')?,
    };

    let mut taken: HashSet<String> = HashSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for (i, mut row) in rows.into_iter().enumerate() {
        let row_no = i + 1;
        let id = take_text(&mut row, id_field);
        let label = take_text(&mut row, label_field);
        let id = match (id, &label) {
            (Some(id), _) => id,
            (None, Some(l)) => mint_unique_id(l, |c| taken.contains(c)).map_err(|_| SourceError::MissingField { row: row_no })?,
            (None, None) => return Err(SourceError::MissingField { row: row_no }),
        };
        row.insert("id".into(), Value::String(id));
        if let Some(l) = label {
            row.insert("label".into(), Value::String(l));
        }
        let obj = object_from_map(row).map_err(|e| SourceError::parse(format!("row {row_no}"), e))?;
        taken.insert(obj.id.clone());
        out.push(obj);
    }
    Ok(out)
}

fn take_text(row: &mut Map<String, Value>, field: &str) -> Option<String> {
    let v = row.remove(field)?;
    let s = match v {
        Value::String(s) => s,
        Value::Number(n) => n.to_string(),
        _ => return None,
    };
    let s = s.trim().to_string();
    (!s.is_empty()).then_some(s)
}

fn entries(v: Value, what: &str) -> Result<Vec<Map<String, Value>>, SourceError> {
    let items = match v {
        Value::Array(items) => items,
        Value::Null => Vec::new(),
        _ => return Err(SourceError::parse(what, "expected a list of entries")),
    };
    items
        .into_iter()
        .enumerate()
        .map(|(i, item)| match item {
            Value::Object(m) => Ok(m),
            _ => Err(SourceError::parse(what, format!("entry {} is not a mapping", i + 1))),
        })
        .collect()
}

fn delimited(text: &str, delimiter: u8) -> Result<Vec<Map<String, Value>>, SourceError> {
    let what = if delimiter == b'\t' { "TSV data" } else { "CSV data" };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| SourceError::parse(what, e))?.clone();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| SourceError::parse(what, e))?;
        let mut row = Map::new();
        for (name, cell) in headers.iter().zip(record.iter()) {
            if cell.is_empty() {
                continue;
            }
            let value = match name {
                "aliases" => Value::Array(split_pipe(cell).map(Value::from).collect()),
                "relationships" => Value::Array(
                    split_pipe(cell)
                        .map(|pair| {
                            let (p, t) = pair.split_once(':').ok_or_else(|| {
                                SourceError::parse(what, format!("relationship {pair:?} is not predicate:target"))
                            })?;
                            Ok(serde_json::json!({"predicate": p.trim(), "target": t.trim()}))
                        })
                        .collect::<Result<_, SourceError>>()?,
                ),
                _ => Value::String(cell.to_string()),
            };
            row.insert(name.to_string(), value);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn split_pipe(cell: &str) -> impl Iterator<Item = &str> {
    cell.split('|').map(str::trim).filter(|s| !s.is_empty())
}
