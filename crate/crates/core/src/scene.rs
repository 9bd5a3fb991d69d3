//! Constraint-based 2-D scene placement.
//!
//! A scenario ships a [`SceneRecipe`] (extent, named regions, actor rules)
//! plus [`ConstraintTemplate`]s whose subjects are role patterns like
//! `bystander:*`. Once a realization binds the parameters, the templates
//! instantiate into concrete per-actor [`PlacementConstraint`]s and the
//! solver places actors one at a time by rejection sampling, driven solely by
//! the realization seed. Coordinates are meters, origin at the extent's
//! southwest corner, x east, y north. Compass bearings are degrees clockwise
//! from north.
//!
//! [`verify`] re-checks every constraint independently and is the oracle for
//! [`place`]: an accepted scene always verifies clean.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{substream, SeedStream};
use crate::scenario::ParamValue;

/// Stream label separating placement draws from simulation draws.
const PLACEMENT_STREAM_LABEL: u64 = 0xA11C;

/// Half-width of the accepted band around a heading_from bearing, degrees.
pub const HEADING_TOLERANCE_DEG: f64 = 22.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x && p[0] <= self.x + self.w && p[1] >= self.y && p[1] <= self.y + self.h
    }

    pub fn center(&self) -> [f64; 2] {
        [self.x + self.w / 2.0, self.y + self.h / 2.0]
    }

    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = (self.x + self.w).min(other.x + other.w);
        let y1 = (self.y + self.h).min(other.y + other.h);
        (x1 > x0 && y1 > y0).then_some(Rect {
            x: x0,
            y: y0,
            w: x1 - x0,
            h: y1 - y0,
        })
    }

    pub fn area_km2(&self) -> f64 {
        self.w * self.h / 1.0e6
    }
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Compass bearing from `from` to `to`: 0 = north (+y), 90 = east (+x).
pub fn bearing_deg(from: [f64; 2], to: [f64; 2]) -> f64 {
    let b = (to[0] - from[0]).atan2(to[1] - from[1]).to_degrees();
    (b + 360.0) % 360.0
}

/// Absolute angular difference on the circle, in [0, 180].
pub fn angle_diff_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorRole {
    UavStart,
    Target,
    Bystander,
    Clutter,
}

impl ActorRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            ActorRole::UavStart => "uav_start",
            ActorRole::Target => "target",
            ActorRole::Bystander => "bystander",
            ActorRole::Clutter => "clutter",
        }
    }
}

impl fmt::Display for ActorRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How many actors an [`ActorRule`] produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountRule {
    Fixed(u32),
    /// Count read directly from a numeric parameter.
    Param(String),
    /// Parameter in persons per square kilometer, converted over the extent
    /// area and rounded to the nearest integer.
    DensityParam(String),
}

fn default_scale() -> f64 {
    1.0
}

/// A scalar that may be literal or bound to a realization parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValueExpr {
    Lit(f64),
    Param {
        param: String,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    /// A compass word parameter (N/NE/E/SE/S/SW/W/NW) resolved to degrees.
    Bearing { bearing_param: String },
}

fn compass_to_deg(word: &str) -> Option<f64> {
    let deg = match word.to_ascii_uppercase().as_str() {
        "N" => 0.0,
        "NE" => 45.0,
        "E" => 90.0,
        "SE" => 135.0,
        "S" => 180.0,
        "SW" => 225.0,
        "W" => 270.0,
        "NW" => 315.0,
        _ => return None,
    };
    Some(deg)
}

impl ValueExpr {
    pub fn resolve(&self, params: &BTreeMap<String, ParamValue>) -> Result<f64, SceneError> {
        match self {
            ValueExpr::Lit(v) => Ok(*v),
            ValueExpr::Param { param, scale } => match params.get(param) {
                Some(ParamValue::Num(v)) => Ok(v * scale),
                Some(ParamValue::Text(t)) => Err(SceneError::NonNumericParam {
                    param: param.clone(),
                    value: t.clone(),
                }),
                None => Err(SceneError::MissingParam(param.clone())),
            },
            ValueExpr::Bearing { bearing_param } => match params.get(bearing_param) {
                Some(ParamValue::Text(word)) => compass_to_deg(word).ok_or_else(|| {
                    SceneError::BadCompassWord {
                        param: bearing_param.clone(),
                        word: word.clone(),
                    }
                }),
                Some(ParamValue::Num(deg)) => Ok(*deg),
                None => Err(SceneError::MissingParam(bearing_param.clone())),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorRule {
    pub role: ActorRole,
    pub count: CountRule,
    pub radius_m: f64,
    pub concealment: ValueExpr,
}

/// Relational constraint over role patterns, bound per realization.
///
/// `subject` is `role:index` or `role:*`; `reference` is a region name or a
/// `role:index` pattern. Subjects must resolve to actors placed after their
/// references (actor rules instantiate in declaration order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintTemplate {
    pub kind: ConstraintKind,
    pub subject: String,
    pub reference: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<ValueExpr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    WithinRegion,
    MinDistance,
    MaxDistance,
    HeadingFrom,
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConstraintKind::WithinRegion => "within_region",
            ConstraintKind::MinDistance => "min_distance",
            ConstraintKind::MaxDistance => "max_distance",
            ConstraintKind::HeadingFrom => "heading_from",
        };
        f.write_str(s)
    }
}

/// A fully resolved constraint: concrete subject actor, concrete reference
/// (actor id or region name), scalar value in meters or degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementConstraint {
    pub kind: ConstraintKind,
    pub subject: String,
    pub reference: String,
    pub value: f64,
}

impl fmt::Display for PlacementConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {}", self.kind, self.subject, self.reference)?;
        if self.kind != ConstraintKind::WithinRegion {
            write!(f, ", {}", self.value)?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecipe {
    /// Scene width and height in meters.
    pub extent_m: [f64; 2],
    #[serde(default)]
    pub regions: BTreeMap<String, Rect>,
    /// Region the agent is cued to search; defaults to the whole extent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cued_region: Option<String>,
    pub actors: Vec<ActorRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Actor {
    pub id: String,
    pub role: ActorRole,
    pub position: [f64; 2],
    pub radius_m: f64,
    pub concealment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub extent_m: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cued_region: Option<String>,
    #[serde(default)]
    pub regions: BTreeMap<String, Rect>,
    pub actors: Vec<Actor>,
}

impl Scene {
    pub fn extent_rect(&self) -> Rect {
        Rect {
            x: 0.0,
            y: 0.0,
            w: self.extent_m[0],
            h: self.extent_m[1],
        }
    }

    pub fn actor(&self, id: &str) -> Option<&Actor> {
        self.actors.iter().find(|a| a.id == id)
    }

    /// The rectangle the agent sweeps: the cued region, or the extent.
    pub fn search_rect(&self) -> Rect {
        self.cued_region
            .as_ref()
            .and_then(|name| self.regions.get(name))
            .copied()
            .unwrap_or_else(|| self.extent_rect())
    }
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("missing parameter {0}")]
    MissingParam(String),
    #[error("parameter {param} is not numeric (got \"{value}\")")]
    NonNumericParam { param: String, value: String },
    #[error("parameter {param} holds \"{word}\", not a compass direction")]
    BadCompassWord { param: String, word: String },
    #[error("constraint subject pattern \"{0}\" matches no actor")]
    UnknownSubject(String),
    #[error("constraint reference \"{0}\" is neither a region nor a placed actor pattern")]
    UnknownReference(String),
    #[error("negative or zero distance value {value} in {constraint}")]
    BadDistance { constraint: String, value: f64 },
    #[error("scenario has no scene recipe")]
    NoRecipe,
    #[error(
        "unsatisfiable placement for {actor} after {attempts} attempts; \
         first-violation histogram: {histogram:?}"
    )]
    Unsatisfiable {
        actor: String,
        attempts: u32,
        histogram: BTreeMap<String, u32>,
    },
    #[error("placed scene failed verification: {0:?}")]
    PlacementInvalid(Vec<Violation>),
}

/// One violated scene invariant found by [`verify`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Intersection { a: String, b: String },
    OutsideExtent { actor: String },
    Constraint { constraint: PlacementConstraint, actual: f64 },
    MissingActor { id: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Intersection { a, b } => write!(f, "intersection({a},{b})"),
            Violation::OutsideExtent { actor } => write!(f, "outside_extent({actor})"),
            Violation::Constraint { constraint, actual } => {
                write!(f, "{constraint} violated (actual {actual:.3})")
            }
            Violation::MissingActor { id } => write!(f, "missing_actor({id})"),
        }
    }
}

/// An actor awaiting placement.
#[derive(Debug, Clone)]
pub struct ActorSpec {
    pub id: String,
    pub role: ActorRole,
    pub radius_m: f64,
    pub concealment: f64,
}

/// Expand actor rules and constraint templates against bound parameters.
pub fn resolve_actors(
    recipe: &SceneRecipe,
    templates: &[ConstraintTemplate],
    params: &BTreeMap<String, ParamValue>,
) -> Result<(Vec<ActorSpec>, Vec<PlacementConstraint>), SceneError> {
    let extent = Rect {
        x: 0.0,
        y: 0.0,
        w: recipe.extent_m[0],
        h: recipe.extent_m[1],
    };
    let mut actors: Vec<ActorSpec> = Vec::new();
    let mut per_role: BTreeMap<ActorRole, u32> = BTreeMap::new();
    for rule in &recipe.actors {
        let n = match &rule.count {
            CountRule::Fixed(n) => *n,
            CountRule::Param(p) => match params.get(p) {
                Some(ParamValue::Num(v)) => v.round().max(0.0) as u32,
                Some(ParamValue::Text(t)) => {
                    return Err(SceneError::NonNumericParam {
                        param: p.clone(),
                        value: t.clone(),
                    })
                }
                None => return Err(SceneError::MissingParam(p.clone())),
            },
            CountRule::DensityParam(p) => match params.get(p) {
                Some(ParamValue::Num(v)) => (v * extent.area_km2()).round().max(0.0) as u32,
                Some(ParamValue::Text(t)) => {
                    return Err(SceneError::NonNumericParam {
                        param: p.clone(),
                        value: t.clone(),
                    })
                }
                None => return Err(SceneError::MissingParam(p.clone())),
            },
        };
        let concealment = rule.concealment.resolve(params)?.clamp(0.0, 1.0);
        for _ in 0..n {
            let idx = per_role.entry(rule.role).or_insert(0);
            actors.push(ActorSpec {
                id: format!("{}-{}", rule.role, idx),
                role: rule.role,
                radius_m: rule.radius_m,
                concealment,
            });
            *idx += 1;
        }
    }

    let mut constraints = Vec::new();
    for t in templates {
        let subjects = match_pattern(&actors, &t.subject)?;
        for subject in subjects {
            let reference = if recipe.regions.contains_key(&t.reference) {
                t.reference.clone()
            } else {
                let matches = match_pattern(&actors, &t.reference)
                    .map_err(|_| SceneError::UnknownReference(t.reference.clone()))?;
                matches
                    .first()
                    .cloned()
                    .ok_or_else(|| SceneError::UnknownReference(t.reference.clone()))?
            };
            if subject == reference {
                continue;
            }
            let value = match &t.value {
                Some(expr) => expr.resolve(params)?,
                None => 0.0,
            };
            let c = PlacementConstraint {
                kind: t.kind,
                subject,
                reference,
                value,
            };
            if matches!(c.kind, ConstraintKind::MinDistance | ConstraintKind::MaxDistance)
                && value <= 0.0
            {
                return Err(SceneError::BadDistance {
                    constraint: c.to_string(),
                    value,
                });
            }
            constraints.push(c);
        }
    }
    Ok((actors, constraints))
}

/// Expand `role:*` / `role:index` / literal actor id against the actor list.
fn match_pattern(actors: &[ActorSpec], pattern: &str) -> Result<Vec<String>, SceneError> {
    if let Some((role, sel)) = pattern.split_once(':') {
        let matched: Vec<String> = actors
            .iter()
            .filter(|a| a.role.as_str() == role)
            .filter(|a| sel == "*" || a.id == format!("{role}-{sel}"))
            .map(|a| a.id.clone())
            .collect();
        if matched.is_empty() {
            return Err(SceneError::UnknownSubject(pattern.to_string()));
        }
        return Ok(matched);
    }
    if actors.iter().any(|a| a.id == pattern) {
        return Ok(vec![pattern.to_string()]);
    }
    Err(SceneError::UnknownSubject(pattern.to_string()))
}

fn reference_point(
    placed: &BTreeMap<String, [f64; 2]>,
    regions: &BTreeMap<String, Rect>,
    reference: &str,
) -> Option<[f64; 2]> {
    if let Some(r) = regions.get(reference) {
        return Some(r.center());
    }
    placed.get(reference).copied()
}

fn constraint_ok(
    c: &PlacementConstraint,
    pos: [f64; 2],
    placed: &BTreeMap<String, [f64; 2]>,
    regions: &BTreeMap<String, Rect>,
) -> Option<bool> {
    match c.kind {
        ConstraintKind::WithinRegion => regions.get(&c.reference).map(|r| r.contains(pos)),
        ConstraintKind::MinDistance => reference_point(placed, regions, &c.reference)
            .map(|p| distance(pos, p) >= c.value),
        ConstraintKind::MaxDistance => reference_point(placed, regions, &c.reference)
            .map(|p| distance(pos, p) <= c.value),
        ConstraintKind::HeadingFrom => reference_point(placed, regions, &c.reference)
            .map(|p| angle_diff_deg(bearing_deg(p, pos), c.value) <= HEADING_TOLERANCE_DEG),
    }
}

/// Place actors by rejection sampling, driven solely by `seed`.
///
/// Actors are placed in declaration order with an independent proposal stream
/// per actor; each proposal is drawn uniformly from the intersection of the
/// actor's within_region rectangles (the extent by default) and accepted when
/// every constraint against already-placed actors holds and no disks
/// intersect. `max_attempts` bounds the proposals per actor.
pub fn place(
    extent_m: [f64; 2],
    regions: &BTreeMap<String, Rect>,
    cued_region: Option<String>,
    actors: &[ActorSpec],
    constraints: &[PlacementConstraint],
    seed: u64,
    max_attempts: u32,
) -> Result<Scene, SceneError> {
    assert!(max_attempts >= 1, "max_attempts must be at least 1");
    let extent = Rect {
        x: 0.0,
        y: 0.0,
        w: extent_m[0],
        h: extent_m[1],
    };
    let placement_seed = substream(seed, PLACEMENT_STREAM_LABEL);
    let mut placed: BTreeMap<String, [f64; 2]> = BTreeMap::new();
    let mut out: Vec<Actor> = Vec::with_capacity(actors.len());

    for (ordinal, spec) in actors.iter().enumerate() {
        let mine: Vec<&PlacementConstraint> = constraints
            .iter()
            .filter(|c| c.subject == spec.id)
            .collect();
        let mut proposal_rect = extent;
        for c in &mine {
            if c.kind == ConstraintKind::WithinRegion {
                if let Some(r) = regions.get(&c.reference) {
                    proposal_rect = match proposal_rect.intersect(r) {
                        Some(i) => i,
                        None => {
                            let mut histogram = BTreeMap::new();
                            histogram.insert(c.to_string(), max_attempts);
                            return Err(SceneError::Unsatisfiable {
                                actor: spec.id.clone(),
                                attempts: max_attempts,
                                histogram,
                            });
                        }
                    };
                }
            }
        }

        let mut stream = SeedStream::labeled(placement_seed, ordinal as u64);
        let mut histogram: BTreeMap<String, u32> = BTreeMap::new();
        let mut accepted = None;
        'attempts: for _ in 0..max_attempts {
            let pos = [
                stream.next_range(proposal_rect.x, proposal_rect.x + proposal_rect.w),
                stream.next_range(proposal_rect.y, proposal_rect.y + proposal_rect.h),
            ];
            for c in &mine {
                // Constraints referencing actors placed later are checked by
                // the closing verify pass instead.
                if let Some(false) = constraint_ok(c, pos, &placed, regions) {
                    *histogram.entry(c.to_string()).or_insert(0) += 1;
                    continue 'attempts;
                }
            }
            for other in &out {
                if distance(pos, other.position) < spec.radius_m + other.radius_m {
                    *histogram
                        .entry(format!("intersection({}, {})", spec.id, other.id))
                        .or_insert(0) += 1;
                    continue 'attempts;
                }
            }
            accepted = Some(pos);
            break;
        }

        let Some(position) = accepted else {
            return Err(SceneError::Unsatisfiable {
                actor: spec.id.clone(),
                attempts: max_attempts,
                histogram,
            });
        };
        placed.insert(spec.id.clone(), position);
        out.push(Actor {
            id: spec.id.clone(),
            role: spec.role,
            position,
            radius_m: spec.radius_m,
            concealment: spec.concealment,
        });
    }

    let scene = Scene {
        extent_m,
        cued_region,
        regions: regions.clone(),
        actors: out,
    };
    let violations = verify(&scene, constraints);
    if !violations.is_empty() {
        return Err(SceneError::PlacementInvalid(violations));
    }
    Ok(scene)
}

/// Resolve a realization's actors and constraints, then place them.
pub fn place_realization(
    recipe: &SceneRecipe,
    templates: &[ConstraintTemplate],
    params: &BTreeMap<String, ParamValue>,
    seed: u64,
    max_attempts: u32,
) -> Result<Scene, SceneError> {
    let (actors, constraints) = resolve_actors(recipe, templates, params)?;
    place(
        recipe.extent_m,
        &recipe.regions,
        recipe.cued_region.clone(),
        &actors,
        &constraints,
        seed,
        max_attempts,
    )
}

/// Independently re-check every constraint plus the scene invariants
/// (positions inside the extent, no intersecting disks).
pub fn verify(scene: &Scene, constraints: &[PlacementConstraint]) -> Vec<Violation> {
    let mut violations = Vec::new();
    let extent = scene.extent_rect();
    let placed: BTreeMap<String, [f64; 2]> = scene
        .actors
        .iter()
        .map(|a| (a.id.clone(), a.position))
        .collect();

    for a in &scene.actors {
        if !extent.contains(a.position) {
            violations.push(Violation::OutsideExtent { actor: a.id.clone() });
        }
    }
    for (i, a) in scene.actors.iter().enumerate() {
        for b in &scene.actors[i + 1..] {
            if distance(a.position, b.position) < a.radius_m + b.radius_m {
                violations.push(Violation::Intersection {
                    a: a.id.clone(),
                    b: b.id.clone(),
                });
            }
        }
    }
    for c in constraints {
        let Some(pos) = placed.get(&c.subject).copied() else {
            violations.push(Violation::MissingActor { id: c.subject.clone() });
            continue;
        };
        let actual = match c.kind {
            ConstraintKind::WithinRegion => 0.0,
            ConstraintKind::MinDistance | ConstraintKind::MaxDistance => {
                match reference_point(&placed, &scene.regions, &c.reference) {
                    Some(p) => distance(pos, p),
                    None => {
                        violations.push(Violation::MissingActor { id: c.reference.clone() });
                        continue;
                    }
                }
            }
            ConstraintKind::HeadingFrom => {
                match reference_point(&placed, &scene.regions, &c.reference) {
                    Some(p) => bearing_deg(p, pos),
                    None => {
                        violations.push(Violation::MissingActor { id: c.reference.clone() });
                        continue;
                    }
                }
            }
        };
        match constraint_ok(c, pos, &placed, &scene.regions) {
            Some(true) => {}
            Some(false) => violations.push(Violation::Constraint {
                constraint: c.clone(),
                actual,
            }),
            None => violations.push(Violation::MissingActor { id: c.reference.clone() }),
        }
    }
    violations
}
