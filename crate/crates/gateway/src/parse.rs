//! Validation of raw model responses into typed values.

use std::collections::{BTreeMap, HashSet};

use apf_core::formulation::parse_formulation;
use apf_core::RequirementSet;
use apf_core::{Formulation, ItemKind, Ranking};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JsonKind {
    Array,
    Object,
}

impl JsonKind {
    fn opener(self) -> char {
        match self {
            JsonKind::Array => '[',
            JsonKind::Object => '{',
        }
    }
}

/// Drops Markdown code-fence lines and returns the single top-level JSON
/// value of the requested kind.
pub fn extract_json(text: &str, kind: JsonKind) -> Result<Value, GatewayError> {
    let body: String = text
        .lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n");
    let mut candidates = Vec::new();
    let mut i = 0;
    while let Some(off) = body[i..].find(kind.opener()) {
        let start = i + off;
        let mut stream = serde_json::Deserializer::from_str(&body[start..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(value)) => {
                candidates.push(value);
                i = start + stream.byte_offset();
            }
            _ => i = start + 1,
        }
    }
    match candidates.len() {
        0 => Err(GatewayError::NoJsonFound),
        1 => Ok(candidates.pop().expect("one candidate")),
        n => Err(GatewayError::AmbiguousJson(n)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedItem {
    pub requirement_index: usize,
    pub function_type: String,
    pub function_name: String,
    pub expression: String,
}

fn schema(msg: impl Into<String>) -> GatewayError {
    GatewayError::SchemaViolation(msg.into())
}

fn item_kind(function_type: &str) -> Result<ItemKind, GatewayError> {
    match function_type {
        "objective" => Ok(ItemKind::Objective),
        "constraint" => Ok(ItemKind::Constraint),
        other => Err(schema(format!("unknown function_type {other:?}"))),
    }
}

fn generated_items(value: Value) -> Result<Vec<(i64, String, String, String)>, GatewayError> {
    let Value::Array(entries) = value else {
        return Err(schema("expected a JSON array"));
    };
    entries
        .into_iter()
        .enumerate()
        .map(|(k, entry)| {
            let Value::Object(map) = entry else {
                return Err(schema(format!("entry {k} is not an object")));
            };
            let index = map
                .get("requirement_index")
                .and_then(Value::as_i64)
                .ok_or_else(|| schema(format!("entry {k}: requirement_index must be an integer")))?;
            let field = |key: &str| {
                map.get(key)
                    .and_then(Value::as_str)
                    .map(str::to_string)
                    .ok_or_else(|| schema(format!("entry {k}: {key} must be a string")))
            };
            Ok((
                index,
                field("function_type")?,
                field("function_name")?,
                field("expression")?,
            ))
        })
        .collect()
}

/// Parses a generation response into a formulation whose items follow
/// requirement order. Every requirement index must appear exactly once.
pub fn parse_generation_response(text: &str, reqs: &RequirementSet) -> Result<Formulation, GatewayError> {
    let entries = generated_items(extract_json(text, JsonKind::Array)?)?;
    let n = reqs.len();
    let mut seen = vec![0usize; n + 1];
    let mut out_of_range = Vec::new();
    for (index, ..) in &entries {
        if *index >= 1 && (*index as usize) <= n {
            seen[*index as usize] += 1;
        } else {
            out_of_range.push(*index);
        }
    }
    let missing: Vec<usize> = (1..=n).filter(|&k| seen[k] == 0).collect();
    let duplicated: Vec<usize> = (1..=n).filter(|&k| seen[k] > 1).collect();
    if !missing.is_empty() || !duplicated.is_empty() || !out_of_range.is_empty() {
        return Err(GatewayError::IndexCoverage {
            missing,
            duplicated,
            out_of_range,
        });
    }
    let mut ordered: BTreeMap<i64, (String, String, String)> = BTreeMap::new();
    for (index, ftype, name, expr) in entries {
        ordered.insert(index, (ftype, name, expr));
    }
    let mut lines = Vec::with_capacity(n);
    for (index, (ftype, name, expr)) in ordered {
        let kind = item_kind(&ftype)?;
        let expr = expr.trim();
        let body = if expr.starts_with("objective") || expr.starts_with("constraint") {
            expr.to_string()
        } else {
            format!("{} {expr}", kind.keyword())
        };
        let line = format!("{name}: {body}");
        let parsed: Formulation = parse_formulation(&line).map_err(|e| schema(format!("requirement {index}: {e}")))?;
        if parsed.items()[0].kind != kind {
            return Err(schema(format!(
                "requirement {index}: function_type {ftype:?} but expression is a {}",
                parsed.items()[0].kind.keyword()
            )));
        }
        lines.push(line);
    }
    let f: Formulation = parse_formulation(&lines.join("\n")).map_err(|e| schema(e.to_string()))?;
    Ok(f.with_id(reqs.id.clone()))
}

/// Generation response for `f`, item `k` answering requirement `k + 1`.
pub fn generation_response_json(f: &Formulation) -> String {
    let entries: Vec<Value> = f
        .items()
        .iter()
        .enumerate()
        .map(|(k, item)| {
            let printed = apf_core::formulation::print_item(item);
            let body = printed.split_once(": ").map(|(_, b)| b.to_string()).unwrap_or(printed);
            json!({
                "requirement_index": k + 1,
                "function_type": item.kind.keyword(),
                "function_name": item.name,
                "expression": body,
            })
        })
        .collect();
    serde_json::to_string_pretty(&Value::Array(entries)).expect("json serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationResult {
    pub ranking: Ranking,
    pub raw_response: String,
}

/// Parses a best-first list of instance ids; it must be a permutation of `ids`.
pub fn parse_annotation_response(text: &str, ids: &[String], source: &str) -> Result<AnnotationResult, GatewayError> {
    let Value::Array(entries) = extract_json(text, JsonKind::Array)? else {
        return Err(schema("expected a JSON array"));
    };
    let ordered: Vec<String> = entries
        .into_iter()
        .map(|v| match v {
            Value::String(s) => Ok(s),
            other => Err(schema(format!("ranking entry {other} is not a string"))),
        })
        .collect::<Result<_, _>>()?;
    let expected: HashSet<&str> = ids.iter().map(String::as_str).collect();
    let mut seen = HashSet::new();
    let extra: Vec<String> = ordered
        .iter()
        .filter(|id| !expected.contains(id.as_str()) || !seen.insert(id.as_str()))
        .cloned()
        .collect();
    let missing: Vec<String> = ids.iter().filter(|id| !seen.contains(id.as_str())).cloned().collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(GatewayError::NotAPermutation { missing, extra });
    }
    let ranking = Ranking::from_order(source, ordered).map_err(|e| schema(e.to_string()))?;
    Ok(AnnotationResult {
        ranking,
        raw_response: text.to_string(),
    })
}

/// Serializes a best-first ordering as an annotation response.
pub fn annotation_response_json(ordered: &[String]) -> String {
    serde_json::to_string(ordered).expect("json serializes")
}

/// Parses `{"1": [...], ..., "n": [...]}`, keeping the first `versions`
/// phrasings of each requirement.
pub fn parse_paraphrase_response(text: &str, n: usize, versions: usize) -> Result<Vec<Vec<String>>, GatewayError> {
    let Value::Object(map) = extract_json(text, JsonKind::Object)? else {
        return Err(schema("expected a JSON object"));
    };
    let mut out = Vec::with_capacity(n);
    for k in 1..=n {
        let key = k.to_string();
        let Some(Value::Array(list)) = map.get(&key) else {
            return Err(schema(format!("key {key:?} missing or not an array")));
        };
        let texts: Vec<String> = list
            .iter()
            .map(|v| {
                v.as_str()
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .ok_or_else(|| schema(format!("key {key:?}: entries must be non-empty strings")))
            })
            .collect::<Result<_, _>>()?;
        if texts.len() < versions {
            return Err(schema(format!(
                "key {key:?}: {} versions, expected {versions}",
                texts.len()
            )));
        }
        out.push(texts.into_iter().take(versions).collect());
    }
    if let Some(extra) = map
        .keys()
        .find(|k| k.parse::<usize>().map_or(true, |i| i == 0 || i > n))
    {
        return Err(schema(format!("unexpected key {extra:?}")));
    }
    Ok(out)
}

/// Serializes paraphrases as a paraphrase response.
pub fn paraphrase_response_json(variants: &[Vec<String>]) -> String {
    let map: serde_json::Map<String, Value> = variants
        .iter()
        .enumerate()
        .map(|(k, list)| ((k + 1).to_string(), json!(list)))
        .collect();
    serde_json::to_string_pretty(&Value::Object(map)).expect("json serializes")
}
