//! Campaign expansion: one parsed scenario into many fully bound realizations.
//!
//! Expansion is a pure function of `(base, strategy, campaign_seed)`. Each
//! realization gets a seed derived only from `(campaign_seed, index)`, its
//! predicted per-observable difficulty signature, a 1-5 tension grade, and
//! membership in an equi-ethical bucket (realizations sharing an identical
//! signature map). Difficulties are computed before any simulation runs and
//! depend on nothing but the bound parameters.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{observable_difficulty, DecompositionGraph, NodeId};
use crate::rng::{realization_seed, SeedStream};
use crate::scenario::{BaseSimSpec, ParamValue, SlotKind};

/// Stream label for the random-sample index draw.
const EXPAND_STREAM_LABEL: u64 = 0xD0E;

/// How a base scenario expands into realizations.
///
/// Range slots need a discretization to enumerate: `grid` gives them
/// `range_steps` evenly spaced values (endpoints inclusive), and `random`
/// accepts an optional step count for the same purpose. Under `full`, a
/// range slot is an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    FullFactorial,
    GridSample { range_steps: u32 },
    RandomSample { k: u64, range_steps: Option<u32> },
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::FullFactorial => write!(f, "full"),
            Strategy::GridSample { range_steps } => write!(f, "grid:{range_steps}"),
            Strategy::RandomSample { k, range_steps: None } => write!(f, "random:{k}"),
            Strategy::RandomSample { k, range_steps: Some(n) } => write!(f, "random:{k}:{n}"),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("unrecognized strategy \"{0}\"; expected full, grid:N, random:K, or random:K:N")]
pub struct StrategyParseError(String);

impl FromStr for Strategy {
    type Err = StrategyParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || StrategyParseError(s.to_string());
        let mut parts = s.split(':');
        match parts.next() {
            Some("full") => parts.next().is_none().then_some(Strategy::FullFactorial).ok_or_else(bad),
            Some("grid") => {
                let n = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                if n < 2 || parts.next().is_some() {
                    return Err(bad());
                }
                Ok(Strategy::GridSample { range_steps: n })
            }
            Some("random") => {
                let k = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                let range_steps = match parts.next() {
                    None => None,
                    Some(n) => {
                        let n: u32 = n.parse().map_err(|_| bad())?;
                        if n < 2 {
                            return Err(bad());
                        }
                        Some(n)
                    }
                };
                if parts.next().is_some() {
                    return Err(bad());
                }
                Ok(Strategy::RandomSample { k, range_steps })
            }
            _ => Err(bad()),
        }
    }
}

impl Serialize for Strategy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Strategy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One fully bound scenario configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub id: String,
    pub base_id: String,
    pub params: BTreeMap<String, ParamValue>,
    pub seed: u64,
    /// Predicted difficulty per observable whose factor rows are all bound.
    pub difficulty_signature: BTreeMap<NodeId, f64>,
    /// Coarse 1-5 grade of the realization's minimum signature difficulty.
    pub tension: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub base: BaseSimSpec,
    pub strategy: Strategy,
    pub campaign_seed: u64,
    pub realizations: Vec<Realization>,
    /// Equi-ethical buckets: signature key -> member realization ids.
    pub buckets: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Error)]
pub enum ExpandError {
    #[error("range slot \"{0}\" has no binding strategy (use grid:N or random:K:N)")]
    RangeSlotNeedsSteps(String),
    #[error("random sample of {k} exceeds the {total} distinct combinations")]
    KExceedsTotal { k: u64, total: u64 },
    #[error("slot \"{0}\" has no values after deduplication")]
    EmptyAxis(String),
    #[error("combination count overflows u64")]
    CardinalityOverflow,
}

/// Map a difficulty in [0,100] onto the 1-5 tension scale:
/// `ceil(d / 20)` clamped to [1,5].
pub fn to_tension(difficulty: f64) -> u8 {
    (difficulty / 20.0).ceil().clamp(1.0, 5.0) as u8
}

/// Canonical bucket key: signature entries as `id=value` at 4 decimals,
/// sorted by observable id, joined with `;`. Empty signatures key to "-".
pub fn signature_key(signature: &BTreeMap<NodeId, f64>) -> String {
    if signature.is_empty() {
        return "-".to_string();
    }
    signature
        .iter()
        .map(|(id, d)| format!("{id}={d:.4}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn axis_values(
    slot_name: &str,
    kind: &SlotKind,
    strategy: Strategy,
) -> Result<Vec<ParamValue>, ExpandError> {
    let mut values = match kind {
        SlotKind::Enumerated { values } => values.clone(),
        SlotKind::Range { lo, hi } => {
            let steps = match strategy {
                Strategy::GridSample { range_steps } => range_steps,
                Strategy::RandomSample {
                    range_steps: Some(n),
                    ..
                } => n,
                _ => return Err(ExpandError::RangeSlotNeedsSteps(slot_name.to_string())),
            };
            (0..steps)
                .map(|i| {
                    ParamValue::Num(lo + (hi - lo) * i as f64 / (steps - 1) as f64)
                })
                .collect()
        }
    };
    // Duplicate enumerated values would break tuple uniqueness.
    let mut deduped: Vec<ParamValue> = Vec::with_capacity(values.len());
    for v in values.drain(..) {
        if !deduped.contains(&v) {
            deduped.push(v);
        }
    }
    if deduped.is_empty() {
        return Err(ExpandError::EmptyAxis(slot_name.to_string()));
    }
    Ok(deduped)
}

/// Expand a base scenario into a deterministic campaign.
///
/// Full-factorial and grid strategies enumerate every combination in
/// mixed-radix order (last slot varying fastest); random sampling draws `k`
/// distinct combination indices from the campaign seed and emits them in
/// ascending index order. Realization `i` is seeded by
/// [`realization_seed`]`(campaign_seed, i)` regardless of strategy.
pub fn expand(
    base: &BaseSimSpec,
    strategy: Strategy,
    campaign_seed: u64,
    graph: &DecompositionGraph,
) -> Result<Campaign, ExpandError> {
    let axes: Vec<(String, Vec<ParamValue>)> = base
        .slots
        .iter()
        .map(|slot| Ok((slot.name.clone(), axis_values(&slot.name, &slot.kind, strategy)?)))
        .collect::<Result<_, ExpandError>>()?;

    let mut total: u64 = 1;
    for (_, values) in &axes {
        total = total
            .checked_mul(values.len() as u64)
            .ok_or(ExpandError::CardinalityOverflow)?;
    }

    let combo_indices: Vec<u64> = match strategy {
        Strategy::FullFactorial | Strategy::GridSample { .. } => (0..total).collect(),
        Strategy::RandomSample { k, .. } => {
            if k > total {
                return Err(ExpandError::KExceedsTotal { k, total });
            }
            let mut stream = SeedStream::labeled(campaign_seed, EXPAND_STREAM_LABEL);
            stream.sample_distinct(total, k as usize)
        }
    };

    let mut realizations = Vec::with_capacity(combo_indices.len());
    for (i, combo) in combo_indices.iter().enumerate() {
        let mut params = base.fixed.clone();
        let mut rem = *combo;
        for (name, values) in axes.iter().rev() {
            let idx = (rem % values.len() as u64) as usize;
            rem /= values.len() as u64;
            params.insert(name.clone(), values[idx].clone());
        }
        let mut signature = BTreeMap::new();
        for (obs_id, spec) in &graph.observables {
            // Observables whose factor rows are not all numerically bound are
            // simply absent from the signature.
            if let Ok(d) = observable_difficulty(spec, &params) {
                signature.insert(obs_id.clone(), d);
            }
        }
        let min_difficulty = signature.values().copied().fold(f64::INFINITY, f64::min);
        let tension = to_tension(if min_difficulty.is_finite() {
            min_difficulty
        } else {
            0.0
        });
        realizations.push(Realization {
            id: format!("r{i:05}"),
            base_id: base.id.clone(),
            params,
            seed: realization_seed(campaign_seed, i as u64),
            difficulty_signature: signature,
            tension,
        });
    }

    let mut campaign = Campaign {
        base: base.clone(),
        strategy,
        campaign_seed,
        realizations,
        buckets: BTreeMap::new(),
    };
    campaign.buckets = bucket_by_signature(&campaign);
    Ok(campaign)
}

/// On-disk SimSpec document: one realization plus its placed scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpecDoc {
    pub id: String,
    pub base_id: String,
    pub seed: u64,
    pub params: BTreeMap<String, ParamValue>,
    pub scene: crate::scene::Scene,
    pub difficulty_signature: BTreeMap<NodeId, f64>,
    pub tension: u8,
}

impl SimSpecDoc {
    pub fn new(realization: &Realization, scene: crate::scene::Scene) -> Self {
        Self {
            id: realization.id.clone(),
            base_id: realization.base_id.clone(),
            seed: realization.seed,
            params: realization.params.clone(),
            scene,
            difficulty_signature: realization.difficulty_signature.clone(),
            tension: realization.tension,
        }
    }
}

/// Group realizations with identical difficulty signatures.
pub fn bucket_by_signature(campaign: &Campaign) -> BTreeMap<String, Vec<String>> {
    let mut buckets: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for r in &campaign.realizations {
        buckets
            .entry(signature_key(&r.difficulty_signature))
            .or_default()
            .push(r.id.clone());
    }
    buckets
}
