//! Deterministic parser for natural-language scenario descriptions.
//!
//! A scenario file is plain prose with bracketed parameter expressions:
//! `[1,2]` is an enumerated set (numbers or bare words), `[20-40]` is an
//! inclusive numeric range. Each bracket becomes a named [`ParamSlot`] and
//! the surrounding prose is carried verbatim as an inert narrative with
//! `{name}` markers where the brackets stood. Negative numbers cannot appear
//! inside ranges (the hyphen would be ambiguous) and must be enumerated.
//!
//! Slot names derive from the words after the closing bracket: up to three
//! words, stopping at the next bracket, punctuation, or end of text; when no
//! words follow, the word before the bracket is used. Name collisions get a
//! numeric suffix. An optional sidecar renames slots, pins unbracketed
//! parameters, and supplies the scene recipe.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{ConstraintTemplate, SceneRecipe};

/// A scenario parameter value: numeric or a bare word (e.g. an approach
/// direction `N`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Num(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            ParamValue::Num(v) => Some(*v),
            ParamValue::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            ParamValue::Num(_) => None,
            ParamValue::Text(s) => Some(s),
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Num(v) => write!(f, "{v}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlotKind {
    Enumerated { values: Vec<ParamValue> },
    Range { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSlot {
    pub name: String,
    #[serde(flatten)]
    pub kind: SlotKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

/// A parsed scenario: prose with named parameter slots plus everything the
/// downstream stages need to realize it (fixed parameters, scene recipe,
/// placement constraint templates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseSimSpec {
    pub id: String,
    pub mission_objective: String,
    /// Original prose with each bracket replaced by a `{name}` marker.
    pub narrative: String,
    pub slots: Vec<ParamSlot>,
    /// Parameters stated without brackets (from the sidecar).
    #[serde(default)]
    pub fixed: BTreeMap<String, ParamValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneRecipe>,
    #[serde(default)]
    pub constraints: Vec<ConstraintTemplate>,
}

/// Optional sidecar accompanying a scenario text file.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct Sidecar {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub mission_objective: Option<String>,
    /// Parameters stated without brackets.
    #[serde(default)]
    pub fixed: BTreeMap<String, ParamValue>,
    /// Derived slot name -> preferred name.
    #[serde(default)]
    pub rename: BTreeMap<String, String>,
    /// Slot name (after rename) -> unit string.
    #[serde(default)]
    pub units: BTreeMap<String, String>,
    #[serde(default)]
    pub scene: Option<SceneRecipe>,
    #[serde(default)]
    pub constraints: Vec<ConstraintTemplate>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("unbalanced bracket at byte {0}")]
    Unbalanced(usize),
    #[error("empty bracket at byte {0}")]
    EmptyBracket(usize),
    #[error("malformed range \"[{0}]\": {1}")]
    MalformedRange(String, String),
    #[error("mixed separators in bracket \"[{0}]\"")]
    MixedSeparators(String),
    #[error("empty element in bracket \"[{0}]\"")]
    EmptyElement(String),
    #[error("fixed parameter {0} collides with a slot name")]
    FixedCollidesWithSlot(String),
}

fn parse_number(s: &str) -> Option<f64> {
    let t = s.trim();
    if t.is_empty() {
        return None;
    }
    // Reject exotic float syntax so bare words like "1e" or "nan" never
    // become numbers by accident.
    let body = t.strip_prefix('-').unwrap_or(t);
    if !body.chars().all(|c| c.is_ascii_digit() || c == '.') {
        return None;
    }
    if body.is_empty() || body.matches('.').count() > 1 {
        return None;
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn is_word(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

/// Looks like `lo-hi` with two non-negative numerics and a single hyphen.
fn split_range(s: &str) -> Option<(f64, f64)> {
    let (a, b) = s.split_once('-')?;
    Some((parse_number(a.trim())?, parse_number(b.trim())?))
}

fn parse_bracket(content: &str, at: usize) -> Result<SlotKind, ScenarioError> {
    let trimmed = content.trim();
    if trimmed.is_empty() {
        return Err(ScenarioError::EmptyBracket(at));
    }
    if trimmed.contains(',') {
        let mut values = Vec::new();
        for part in trimmed.split(',') {
            let part = part.trim();
            if part.is_empty() {
                return Err(ScenarioError::EmptyElement(trimmed.to_string()));
            }
            if let Some(v) = parse_number(part) {
                values.push(ParamValue::Num(v));
            } else if split_range(part).is_some() {
                return Err(ScenarioError::MixedSeparators(trimmed.to_string()));
            } else if is_word(part) {
                values.push(ParamValue::Text(part.to_string()));
            } else {
                return Err(ScenarioError::EmptyElement(trimmed.to_string()));
            }
        }
        return Ok(SlotKind::Enumerated { values });
    }
    if let Some((lo, hi)) = split_range(trimmed) {
        if lo >= hi {
            return Err(ScenarioError::MalformedRange(
                trimmed.to_string(),
                format!("lo {lo} must be less than hi {hi}"),
            ));
        }
        return Ok(SlotKind::Range { lo, hi });
    }
    if let Some(v) = parse_number(trimmed) {
        return Ok(SlotKind::Enumerated {
            values: vec![ParamValue::Num(v)],
        });
    }
    if is_word(trimmed) {
        return Ok(SlotKind::Enumerated {
            values: vec![ParamValue::Text(trimmed.to_string())],
        });
    }
    Err(ScenarioError::MalformedRange(
        trimmed.to_string(),
        "not an enumeration, range, number, or word".to_string(),
    ))
}

const NAME_WORD_CAP: usize = 3;

fn clean_word(w: &str) -> String {
    w.chars()
        .filter(|c| c.is_ascii_alphanumeric() || *c == '_')
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

/// Derive a slot name from the words following `after` (up to three, stopping
/// at a bracket or sentence punctuation), falling back to the word before the
/// bracket, then to "slot".
fn derive_name(before: &str, after: &str) -> String {
    let mut words = Vec::new();
    for tok in after.split_whitespace() {
        if tok.starts_with('[') || words.len() == NAME_WORD_CAP {
            break;
        }
        let stop = tok.contains(['.', ',', ';', ':', '!', '?']);
        let w = clean_word(tok);
        if !w.is_empty() {
            words.push(w);
        }
        if stop {
            break;
        }
    }
    if words.is_empty() {
        if let Some(prev) = before.split_whitespace().last() {
            let w = clean_word(prev);
            if !w.is_empty() {
                return w;
            }
        }
        return "slot".to_string();
    }
    words.join("_")
}

fn unique_name(base: &str, taken: &BTreeSet<String>) -> String {
    if !taken.contains(base) {
        return base.to_string();
    }
    let mut n = 2;
    loop {
        let candidate = format!("{base}_{n}");
        if !taken.contains(&candidate) {
            return candidate;
        }
        n += 1;
    }
}

/// Parse scenario prose into a [`BaseSimSpec`], folding in the sidecar.
///
/// Identical input always yields an identical spec; slots appear in textual
/// order of their brackets.
pub fn parse_scenario(text: &str, sidecar: &Sidecar) -> Result<BaseSimSpec, ScenarioError> {
    let mut narrative = String::with_capacity(text.len());
    let mut slots: Vec<ParamSlot> = Vec::new();
    let mut taken: BTreeSet<String> = BTreeSet::new();
    let mut rest = text;
    let mut offset = 0usize;

    loop {
        match (rest.find('['), rest.find(']')) {
            (None, None) => {
                narrative.push_str(rest);
                break;
            }
            (None, Some(close)) => return Err(ScenarioError::Unbalanced(offset + close)),
            (Some(open), close) => {
                let close = match close {
                    Some(c) if c > open => c,
                    _ => return Err(ScenarioError::Unbalanced(offset + open)),
                };
                let content = &rest[open + 1..close];
                if content.contains('[') {
                    return Err(ScenarioError::Unbalanced(offset + open));
                }
                let kind = parse_bracket(content, offset + open)?;
                let before = &rest[..open];
                let after = &rest[close + 1..];
                let derived = derive_name(before, after);
                let renamed = sidecar.rename.get(&derived).cloned().unwrap_or(derived);
                let name = unique_name(&renamed, &taken);
                taken.insert(name.clone());
                narrative.push_str(before);
                narrative.push('{');
                narrative.push_str(&name);
                narrative.push('}');
                let unit = sidecar.units.get(&name).cloned();
                slots.push(ParamSlot { name, kind, unit });
                offset += close + 1;
                rest = after;
            }
        }
    }

    for key in sidecar.fixed.keys() {
        if taken.contains(key) {
            return Err(ScenarioError::FixedCollidesWithSlot(key.clone()));
        }
    }

    Ok(BaseSimSpec {
        id: sidecar.id.clone().unwrap_or_else(|| "scenario".to_string()),
        mission_objective: sidecar.mission_objective.clone().unwrap_or_default(),
        narrative,
        slots,
        fixed: sidecar.fixed.clone(),
        scene: sidecar.scene.clone(),
        constraints: sidecar.constraints.clone(),
    })
}

/// Number of distinct full-factorial realizations: the product over slots of
/// the enumerated value count, with ranges contributing `range_steps` each.
pub fn slot_cardinality(spec: &BaseSimSpec, range_steps: u32) -> u64 {
    assert!(range_steps >= 2, "range_steps must be at least 2");
    spec.slots
        .iter()
        .map(|s| match &s.kind {
            SlotKind::Enumerated { values } => values.len() as u64,
            SlotKind::Range { .. } => range_steps as u64,
        })
        .product()
}

/// Substitute a chosen value for every slot marker, reproducing prose with
/// all brackets eliminated.
pub fn render(spec: &BaseSimSpec, bindings: &BTreeMap<String, ParamValue>) -> String {
    let mut out = spec.narrative.clone();
    for slot in &spec.slots {
        let marker = format!("{{{}}}", slot.name);
        if let Some(v) = bindings.get(&slot.name) {
            out = out.replacen(&marker, &v.to_string(), 1);
        }
    }
    out
}
