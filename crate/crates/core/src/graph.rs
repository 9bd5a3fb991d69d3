//! The ethical-decomposition graph and its key-factor difficulty tables.
//!
//! The graph is a DAG with five fixed levels — Root, Principle, KeyAttribute,
//! VAB, Observable — where edges only step one level down and every leaf is
//! an Observable carrying an [`ObservableSpec`]. Difficulty is a property of
//! the scenario configuration alone: [`observable_difficulty`] takes scenario
//! parameters and nothing about the agent, and returns the minimum over the
//! observable's key-factor rows (a success certifies only to the easiest
//! contributing factor).
//!
//! Everything here is immutable after parse and safe to share across
//! evaluation workers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::ParamValue;

/// Identifier of a graph node, e.g. `KA-18`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

/// Decomposition level. Edges may only go from one level to the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeLevel {
    Root,
    Principle,
    KeyAttribute,
    Vab,
    Observable,
}

impl NodeLevel {
    pub fn depth(self) -> u8 {
        match self {
            NodeLevel::Root => 0,
            NodeLevel::Principle => 1,
            NodeLevel::KeyAttribute => 2,
            NodeLevel::Vab => 3,
            NodeLevel::Observable => 4,
        }
    }
}

impl fmt::Display for NodeLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NodeLevel::Root => "root",
            NodeLevel::Principle => "principle",
            NodeLevel::KeyAttribute => "key_attribute",
            NodeLevel::Vab => "vab",
            NodeLevel::Observable => "observable",
        };
        f.write_str(s)
    }
}

/// The five accepted Principle labels.
pub const PRINCIPLE_LABELS: [&str; 5] = [
    "Responsible",
    "Equitable",
    "Traceable",
    "Reliable",
    "Governable",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub level: NodeLevel,
    pub label: String,
}

/// Whether larger raw values make the observable harder or easier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
}

/// One key-factor row: a scenario parameter and its calibration against the
/// shared difficulty grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyFactorRow {
    /// Human-readable factor name, e.g. "Rain level". The scenario parameter
    /// key is [`param_key`](Self::param_key) (lowercased, underscored).
    pub name: String,
    pub unit: String,
    pub direction: Direction,
    /// Raw scenario-parameter values aligned column-for-column with the grid.
    pub raw_values: Vec<f64>,
}

impl KeyFactorRow {
    /// Normalized parameter key: lowercase, runs of non-alphanumerics
    /// collapsed to single underscores ("Rain level" -> "rain_level").
    pub fn param_key(&self) -> String {
        param_key(&self.name)
    }
}

pub fn param_key(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    let mut last_us = true;
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
            last_us = false;
        } else if !last_us {
            out.push('_');
            last_us = true;
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    out
}

/// Per-observable calibration table mapping raw scenario parameters to the
/// shared 0-100 difficulty scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyFactorTable {
    /// Difficulty breakpoints (column headers), strictly increasing in [0,100].
    pub grid: Vec<f64>,
    pub factors: Vec<KeyFactorRow>,
}

/// Which log measurement an observable computes; see the scoring module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluatorKind {
    DetectionRate,
    ClassificationAccuracyBystander,
    ClassificationAccuracyAdversary,
    MarkSuppressionCompliance,
    MissionComplete,
}

impl fmt::Display for EvaluatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EvaluatorKind::DetectionRate => "detection_rate",
            EvaluatorKind::ClassificationAccuracyBystander => "classification_accuracy_bystander",
            EvaluatorKind::ClassificationAccuracyAdversary => "classification_accuracy_adversary",
            EvaluatorKind::MarkSuppressionCompliance => "mark_suppression_compliance",
            EvaluatorKind::MissionComplete => "mission_complete",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub id: NodeId,
    /// Success threshold in [0,1].
    pub tau: f64,
    /// Whether the observable earns partial credit above the threshold.
    pub graded: bool,
    /// Evaluator-specific knobs, e.g. a detection-confidence floor.
    #[serde(default)]
    pub metadata: BTreeMap<String, f64>,
    pub evaluator: EvaluatorKind,
    pub key_factor_table: KeyFactorTable,
}

/// The Principles -> KA -> VAB -> Observable DAG.
///
/// Construct through [`parse_graph`] for validated input, or
/// [`DecompositionGraph::from_parts`] for unchecked assembly (tests,
/// authoring tools) followed by [`validate_graph`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionGraph {
    pub nodes: BTreeMap<NodeId, Node>,
    pub edges: BTreeSet<(NodeId, NodeId)>,
    pub root: NodeId,
    pub observables: BTreeMap<NodeId, ObservableSpec>,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("malformed graph document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("empty graph")]
    Empty,
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("edge references unknown node {0}")]
    DanglingEdge(NodeId),
    #[error("duplicate observable spec for {0}")]
    DuplicateSpec(NodeId),
    #[error("observable spec {spec} attached to non-observable node {node}")]
    SpecOnNonObservable { spec: NodeId, node: NodeId },
    #[error("graph is invalid:\n{0}")]
    Invalid(ValidationReport),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("missing parameter {param} for factor row \"{row}\" of {observable}")]
    MissingParameter {
        observable: NodeId,
        row: String,
        param: String,
    },
}

/// One violated invariant found by [`validate_graph`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ValidationIssue {
    Cycle { at: NodeId },
    NoRoot,
    MultipleSources { sources: Vec<NodeId> },
    RootNotSource { root: NodeId },
    RootWrongLevel { root: NodeId },
    LevelOrder { parent: NodeId, child: NodeId },
    NonObservableLeaf { node: NodeId },
    ObservableWithChildren { node: NodeId },
    BadPrincipleLabel { node: NodeId, label: String },
    MissingTable { observable: NodeId },
    EmptyNodeId,
    BadGrid { observable: NodeId, detail: String },
    BadRow { observable: NodeId, row: String, detail: String },
    BadTau { observable: NodeId, tau: f64 },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationIssue::Cycle { at } => write!(f, "cycle through {at}"),
            ValidationIssue::NoRoot => write!(f, "no source node"),
            ValidationIssue::MultipleSources { sources } => {
                write!(f, "multiple source nodes: ")?;
                for (i, s) in sources.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{s}")?;
                }
                Ok(())
            }
            ValidationIssue::RootNotSource { root } => {
                write!(f, "declared root {root} has incoming edges")
            }
            ValidationIssue::RootWrongLevel { root } => {
                write!(f, "declared root {root} is not at the root level")
            }
            ValidationIssue::LevelOrder { parent, child } => {
                write!(f, "level-order violation on edge {parent} -> {child}")
            }
            ValidationIssue::NonObservableLeaf { node } => {
                write!(f, "leaf {node} is not an observable")
            }
            ValidationIssue::ObservableWithChildren { node } => {
                write!(f, "observable {node} has outgoing edges")
            }
            ValidationIssue::BadPrincipleLabel { node, label } => {
                write!(f, "principle {node} has unrecognized label \"{label}\"")
            }
            ValidationIssue::MissingTable { observable } => {
                write!(f, "missing table for observable {observable}")
            }
            ValidationIssue::EmptyNodeId => write!(f, "empty node id"),
            ValidationIssue::BadGrid { observable, detail } => {
                write!(f, "bad grid for {observable}: {detail}")
            }
            ValidationIssue::BadRow {
                observable,
                row,
                detail,
            } => write!(f, "bad factor row \"{row}\" for {observable}: {detail}"),
            ValidationIssue::BadTau { observable, tau } => {
                write!(f, "tau {tau} out of [0,1] for {observable}")
            }
        }
    }
}

/// Every violated invariant of a graph; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "valid");
        }
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "- {issue}")?;
        }
        Ok(())
    }
}

/// On-disk shape of the graph-config document.
#[derive(Debug, Deserialize)]
struct GraphDoc {
    nodes: Vec<Node>,
    edges: Vec<(NodeId, NodeId)>,
    observables: Vec<ObservableSpec>,
}

impl DecompositionGraph {
    /// Assemble a graph without validating the level/DAG invariants.
    ///
    /// Fails only on structural nonsense that would make validation itself
    /// meaningless: duplicate ids, dangling edges, specs pointing nowhere.
    pub fn from_parts(
        nodes: Vec<Node>,
        edges: Vec<(NodeId, NodeId)>,
        observables: Vec<ObservableSpec>,
    ) -> Result<Self, GraphError> {
        if nodes.is_empty() {
            return Err(GraphError::Empty);
        }
        let mut node_map = BTreeMap::new();
        for n in nodes {
            if node_map.insert(n.id.clone(), n.clone()).is_some() {
                return Err(GraphError::DuplicateNode(n.id));
            }
        }
        let mut edge_set = BTreeSet::new();
        for (p, c) in edges {
            for end in [&p, &c] {
                if !node_map.contains_key(end) {
                    return Err(GraphError::DanglingEdge(end.clone()));
                }
            }
            edge_set.insert((p, c));
        }
        let mut spec_map = BTreeMap::new();
        for spec in observables {
            let Some(node) = node_map.get(&spec.id) else {
                return Err(GraphError::DanglingEdge(spec.id));
            };
            if node.level != NodeLevel::Observable {
                return Err(GraphError::SpecOnNonObservable {
                    spec: spec.id,
                    node: node.id.clone(),
                });
            }
            if spec_map.insert(spec.id.clone(), spec.clone()).is_some() {
                return Err(GraphError::DuplicateSpec(spec.id));
            }
        }
        // The root is the unique source when there is one; otherwise fall back
        // to the first root-level node so validation can name the problem.
        let root = {
            let mut has_in: BTreeSet<&NodeId> = BTreeSet::new();
            for (_, c) in &edge_set {
                has_in.insert(c);
            }
            node_map
                .keys()
                .find(|id| !has_in.contains(id))
                .or_else(|| node_map.keys().next())
                .cloned()
                .expect("nonempty")
        };
        Ok(Self {
            nodes: node_map,
            edges: edge_set,
            root,
            observables: spec_map,
        })
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn children<'a>(&'a self, id: &'a NodeId) -> impl Iterator<Item = &'a NodeId> + 'a {
        self.edges
            .range((id.clone(), NodeId::new(""))..)
            .take_while(move |(p, _)| p == id)
            .map(|(_, c)| c)
    }

    pub fn observable_ids(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes
            .values()
            .filter(|n| n.level == NodeLevel::Observable)
            .map(|n| &n.id)
    }

    pub fn spec(&self, id: &NodeId) -> Option<&ObservableSpec> {
        self.observables.get(id)
    }
}

/// Parse and validate a graph-config document.
pub fn parse_graph(bytes: &[u8]) -> Result<DecompositionGraph, GraphError> {
    let doc: GraphDoc = serde_json::from_slice(bytes)?;
    let graph = DecompositionGraph::from_parts(doc.nodes, doc.edges, doc.observables)?;
    let report = validate_graph(&graph);
    if !report.is_valid() {
        return Err(GraphError::Invalid(report));
    }
    Ok(graph)
}

/// Check every graph invariant; violations are data, not failures.
pub fn validate_graph(g: &DecompositionGraph) -> ValidationReport {
    let mut issues = Vec::new();

    for node in g.nodes.values() {
        if node.id.as_str().is_empty() {
            issues.push(ValidationIssue::EmptyNodeId);
        }
        if node.level == NodeLevel::Principle && !PRINCIPLE_LABELS.contains(&node.label.as_str()) {
            issues.push(ValidationIssue::BadPrincipleLabel {
                node: node.id.clone(),
                label: node.label.clone(),
            });
        }
    }

    // Level ordering: each edge steps exactly one level down.
    for (p, c) in &g.edges {
        let (Some(pn), Some(cn)) = (g.nodes.get(p), g.nodes.get(c)) else {
            continue;
        };
        if cn.level.depth() != pn.level.depth() + 1 {
            issues.push(ValidationIssue::LevelOrder {
                parent: p.clone(),
                child: c.clone(),
            });
        }
    }

    // Single source, and it is the declared root at the Root level.
    let mut in_deg: BTreeMap<&NodeId, usize> = g.nodes.keys().map(|id| (id, 0)).collect();
    for (_, c) in &g.edges {
        if let Some(d) = in_deg.get_mut(c) {
            *d += 1;
        }
    }
    let sources: Vec<NodeId> = in_deg
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(id, _)| (*id).clone())
        .collect();
    match sources.len() {
        0 => issues.push(ValidationIssue::NoRoot),
        1 => {
            if sources[0] != g.root {
                issues.push(ValidationIssue::RootNotSource {
                    root: g.root.clone(),
                });
            }
        }
        _ => issues.push(ValidationIssue::MultipleSources { sources }),
    }
    if let Some(root) = g.nodes.get(&g.root) {
        if root.level != NodeLevel::Root {
            issues.push(ValidationIssue::RootWrongLevel {
                root: g.root.clone(),
            });
        }
    }

    // Acyclicity via Kahn's algorithm; leftover nodes sit on a cycle.
    {
        let mut deg = in_deg.clone();
        let mut queue: Vec<&NodeId> = deg
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(id, _)| *id)
            .collect();
        let mut removed = 0usize;
        while let Some(id) = queue.pop() {
            removed += 1;
            for child in g.children(id) {
                if let Some(d) = deg.get_mut(child) {
                    *d -= 1;
                    if *d == 0 {
                        queue.push(child);
                    }
                }
            }
        }
        if removed != g.nodes.len() {
            if let Some(at) = deg
                .iter()
                .filter(|(_, d)| **d > 0)
                .map(|(id, _)| (*id).clone())
                .next()
            {
                issues.push(ValidationIssue::Cycle { at });
            }
        }
    }

    // Leaf <-> observable bijection and spec completeness.
    let mut has_out: BTreeSet<&NodeId> = BTreeSet::new();
    for (p, _) in &g.edges {
        has_out.insert(p);
    }
    for node in g.nodes.values() {
        let is_leaf = !has_out.contains(&node.id);
        match (is_leaf, node.level == NodeLevel::Observable) {
            (true, false) => issues.push(ValidationIssue::NonObservableLeaf {
                node: node.id.clone(),
            }),
            (false, true) => issues.push(ValidationIssue::ObservableWithChildren {
                node: node.id.clone(),
            }),
            _ => {}
        }
        if node.level == NodeLevel::Observable {
            match g.observables.get(&node.id) {
                None => issues.push(ValidationIssue::MissingTable {
                    observable: node.id.clone(),
                }),
                Some(spec) => validate_spec(spec, &mut issues),
            }
        }
    }

    ValidationReport { issues }
}

fn validate_spec(spec: &ObservableSpec, issues: &mut Vec<ValidationIssue>) {
    if !(0.0..=1.0).contains(&spec.tau) {
        issues.push(ValidationIssue::BadTau {
            observable: spec.id.clone(),
            tau: spec.tau,
        });
    }
    let table = &spec.key_factor_table;
    let grid = &table.grid;
    if grid.is_empty() {
        issues.push(ValidationIssue::BadGrid {
            observable: spec.id.clone(),
            detail: "empty grid".into(),
        });
    }
    if grid.iter().any(|d| !(0.0..=100.0).contains(d)) {
        issues.push(ValidationIssue::BadGrid {
            observable: spec.id.clone(),
            detail: "grid value outside [0,100]".into(),
        });
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        issues.push(ValidationIssue::BadGrid {
            observable: spec.id.clone(),
            detail: "grid not strictly increasing".into(),
        });
    }
    if table.factors.is_empty() {
        issues.push(ValidationIssue::BadGrid {
            observable: spec.id.clone(),
            detail: "no factor rows".into(),
        });
    }
    for row in &table.factors {
        if row.raw_values.len() != grid.len() {
            issues.push(ValidationIssue::BadRow {
                observable: spec.id.clone(),
                row: row.name.clone(),
                detail: format!(
                    "{} raw values against {} grid columns",
                    row.raw_values.len(),
                    grid.len()
                ),
            });
            continue;
        }
        let monotone = match row.direction {
            Direction::Increasing => row.raw_values.windows(2).all(|w| w[0] <= w[1]),
            Direction::Decreasing => row.raw_values.windows(2).all(|w| w[0] >= w[1]),
        };
        if !monotone {
            issues.push(ValidationIssue::BadRow {
                observable: spec.id.clone(),
                row: row.name.clone(),
                detail: "raw values not monotone for declared direction".into(),
            });
        }
    }
}

/// Distinct Observable leaves reachable from `node` by directed paths.
///
/// For an Observable this is the singleton of itself; a leaf reachable along
/// several paths (diamonds) appears once.
pub fn reachable_leaves(
    g: &DecompositionGraph,
    node: &NodeId,
) -> Result<BTreeSet<NodeId>, GraphError> {
    if !g.nodes.contains_key(node) {
        return Err(GraphError::UnknownNode(node.clone()));
    }
    let mut leaves = BTreeSet::new();
    let mut seen = BTreeSet::new();
    let mut stack = vec![node.clone()];
    while let Some(id) = stack.pop() {
        if !seen.insert(id.clone()) {
            continue;
        }
        let mut any_child = false;
        for child in g.children(&id) {
            any_child = true;
            stack.push(child.clone());
        }
        if !any_child {
            if let Some(n) = g.nodes.get(&id) {
                if n.level == NodeLevel::Observable {
                    leaves.insert(id);
                }
            }
        }
    }
    Ok(leaves)
}

/// Piecewise-linear lookup of a raw scenario value against one factor row.
///
/// Duplicated raw values (plateaus) resolve to the lowest difficulty of the
/// plateau, and raw values beyond either end clamp to the endpoint
/// difficulty; both rules keep the result conservative.
pub fn factor_difficulty(row: &KeyFactorRow, grid: &[f64], raw: f64) -> f64 {
    debug_assert_eq!(row.raw_values.len(), grid.len());
    // Breakpoints ordered by ascending raw value, plateaus collapsed to the
    // lowest grid value seen for that raw value.
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(grid.len());
    let iter: Box<dyn Iterator<Item = (&f64, &f64)>> = match row.direction {
        Direction::Increasing => Box::new(row.raw_values.iter().zip(grid.iter())),
        Direction::Decreasing => Box::new(row.raw_values.iter().rev().zip(grid.iter().rev())),
    };
    for (&rv, &d) in iter {
        match points.last_mut() {
            Some((last_raw, last_d)) if *last_raw == rv => {
                if d < *last_d {
                    *last_d = d;
                }
            }
            _ => points.push((rv, d)),
        }
    }

    let (first, last) = (points[0], points[points.len() - 1]);
    if raw <= first.0 {
        return first.1;
    }
    if raw >= last.0 {
        return last.1;
    }
    for w in points.windows(2) {
        let ((x0, d0), (x1, d1)) = (w[0], w[1]);
        if raw >= x0 && raw < x1 {
            if raw == x0 {
                return d0;
            }
            let t = (raw - x0) / (x1 - x0);
            return d0 + t * (d1 - d0);
        }
    }
    last.1
}

/// Difficulty of one observable under a scenario configuration, with the
/// binding (minimum) factor row named. Ties bind to the earliest row.
///
/// Pure in the scenario parameters; the signature admits no agent input.
pub fn observable_difficulty_binding(
    spec: &ObservableSpec,
    params: &BTreeMap<String, ParamValue>,
) -> Result<(f64, String), GraphError> {
    let table = &spec.key_factor_table;
    let mut best: Option<(f64, &KeyFactorRow)> = None;
    for row in &table.factors {
        let key = row.param_key();
        let raw = match params.get(&key) {
            Some(ParamValue::Num(v)) => *v,
            _ => {
                return Err(GraphError::MissingParameter {
                    observable: spec.id.clone(),
                    row: row.name.clone(),
                    param: key,
                })
            }
        };
        let d = factor_difficulty(row, &table.grid, raw);
        match best {
            Some((bd, _)) if bd <= d => {}
            _ => best = Some((d, row)),
        }
    }
    let (d, row) = best.expect("validated tables have at least one row");
    Ok((d, row.name.clone()))
}

/// Minimum factor difficulty over all key-factor rows; see
/// [`observable_difficulty_binding`].
pub fn observable_difficulty(
    spec: &ObservableSpec,
    params: &BTreeMap<String, ParamValue>,
) -> Result<f64, GraphError> {
    observable_difficulty_binding(spec, params).map(|(d, _)| d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{num_params, table1_spec};

    fn mini_nodes() -> Vec<Node> {
        let mk = |id: &str, level, label: &str| Node {
            id: NodeId::new(id),
            level,
            label: label.into(),
        };
        vec![
            mk("REBAR", NodeLevel::Root, "REBAR"),
            mk("P1", NodeLevel::Principle, "Reliable"),
            mk("KA1", NodeLevel::KeyAttribute, "KA1"),
            mk("VAB1", NodeLevel::Vab, "VAB1"),
            mk("VAB2", NodeLevel::Vab, "VAB2"),
            mk("OBS1", NodeLevel::Observable, "OBS1"),
            mk("OBS2", NodeLevel::Observable, "OBS2"),
            mk("OBS3", NodeLevel::Observable, "OBS3"),
        ]
    }

    fn mini_edges() -> Vec<(NodeId, NodeId)> {
        [
            ("REBAR", "P1"),
            ("P1", "KA1"),
            ("KA1", "VAB1"),
            ("KA1", "VAB2"),
            ("VAB1", "OBS1"),
            ("VAB1", "OBS2"),
            ("VAB2", "OBS3"),
        ]
        .iter()
        .map(|(p, c)| (NodeId::new(*p), NodeId::new(*c)))
        .collect()
    }

    fn dummy_spec(id: &str) -> ObservableSpec {
        ObservableSpec {
            id: NodeId::new(id),
            tau: 0.5,
            graded: false,
            metadata: BTreeMap::new(),
            evaluator: EvaluatorKind::DetectionRate,
            key_factor_table: KeyFactorTable {
                grid: vec![10.0, 100.0],
                factors: vec![KeyFactorRow {
                    name: "Rain level".into(),
                    unit: "level".into(),
                    direction: Direction::Increasing,
                    raw_values: vec![0.0, 9.0],
                }],
            },
        }
    }

    fn mini_graph() -> DecompositionGraph {
        DecompositionGraph::from_parts(
            mini_nodes(),
            mini_edges(),
            vec![dummy_spec("OBS1"), dummy_spec("OBS2"), dummy_spec("OBS3")],
        )
        .unwrap()
    }

    #[test]
    fn valid_graph_has_empty_report() {
        assert!(validate_graph(&mini_graph()).is_valid());
    }

    #[test]
    fn empty_document_is_an_error() {
        let err = parse_graph(br#"{"nodes":[],"edges":[],"observables":[]}"#).unwrap_err();
        assert!(err.to_string().contains("empty graph"), "{err}");
    }

    #[test]
    fn reversed_edge_is_a_level_order_error() {
        let doc = serde_json::json!({
            "nodes": [
                {"id": "OBS1", "level": "observable", "label": "o"},
                {"id": "VAB1", "level": "vab", "label": "v"},
            ],
            "edges": [["OBS1", "VAB1"]],
            "observables": [dummy_spec("OBS1")],
        });
        let err = parse_graph(serde_json::to_vec(&doc).unwrap().as_slice()).unwrap_err();
        assert!(err.to_string().contains("level-order"), "{err}");
    }

    #[test]
    fn duplicate_node_rejected() {
        let mut nodes = mini_nodes();
        nodes.push(nodes[0].clone());
        let err = DecompositionGraph::from_parts(nodes, vec![], vec![]).unwrap_err();
        assert!(matches!(err, GraphError::DuplicateNode(_)));
    }

    #[test]
    fn dangling_edge_rejected() {
        let err = DecompositionGraph::from_parts(
            mini_nodes(),
            vec![(NodeId::new("REBAR"), NodeId::new("NOPE"))],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::DanglingEdge(_)));
    }

    #[test]
    fn cycle_is_reported() {
        let mut edges = mini_edges();
        // KA1 -> VAB1 exists; close a loop back up.
        edges.push((NodeId::new("VAB1"), NodeId::new("KA1")));
        let g = DecompositionGraph::from_parts(
            mini_nodes(),
            edges,
            vec![dummy_spec("OBS1"), dummy_spec("OBS2"), dummy_spec("OBS3")],
        )
        .unwrap();
        let report = validate_graph(&g);
        assert!(report.to_string().contains("cycle"), "{report}");
    }

    #[test]
    fn missing_table_is_reported() {
        let g = DecompositionGraph::from_parts(
            mini_nodes(),
            mini_edges(),
            vec![dummy_spec("OBS1"), dummy_spec("OBS2")],
        )
        .unwrap();
        let report = validate_graph(&g);
        assert!(report.to_string().contains("missing table"), "{report}");
    }

    #[test]
    fn bad_principle_label_is_reported() {
        let mut nodes = mini_nodes();
        nodes[1].label = "Fast".into();
        let g = DecompositionGraph::from_parts(
            nodes,
            mini_edges(),
            vec![dummy_spec("OBS1"), dummy_spec("OBS2"), dummy_spec("OBS3")],
        )
        .unwrap();
        assert!(!validate_graph(&g).is_valid());
    }

    #[test]
    fn reachable_leaves_of_ka_covers_all_three() {
        let g = mini_graph();
        let leaves = reachable_leaves(&g, &NodeId::new("KA1")).unwrap();
        let want: BTreeSet<NodeId> = ["OBS1", "OBS2", "OBS3"].iter().map(|s| (*s).into()).collect();
        assert_eq!(leaves, want);
    }

    #[test]
    fn reachable_leaves_of_a_leaf_is_itself() {
        let g = mini_graph();
        let leaves = reachable_leaves(&g, &NodeId::new("OBS3")).unwrap();
        assert_eq!(leaves.len(), 1);
        assert!(leaves.contains(&NodeId::new("OBS3")));
    }

    #[test]
    fn diamond_counts_a_leaf_once() {
        // KA -> {VAB-a, VAB-b}, both -> OBS-x: hand enumeration of the two
        // paths reaches exactly one distinct leaf.
        let mk = |id: &str, level, label: &str| Node {
            id: NodeId::new(id),
            level,
            label: label.into(),
        };
        let nodes = vec![
            mk("KA", NodeLevel::KeyAttribute, "ka"),
            mk("VAB-a", NodeLevel::Vab, "a"),
            mk("VAB-b", NodeLevel::Vab, "b"),
            mk("OBS-x", NodeLevel::Observable, "x"),
        ];
        let edges = [("KA", "VAB-a"), ("KA", "VAB-b"), ("VAB-a", "OBS-x"), ("VAB-b", "OBS-x")]
            .iter()
            .map(|(p, c)| (NodeId::new(*p), NodeId::new(*c)))
            .collect();
        let g = DecompositionGraph::from_parts(nodes, edges, vec![dummy_spec("OBS-x")]).unwrap();
        let leaves = reachable_leaves(&g, &NodeId::new("KA")).unwrap();
        assert_eq!(leaves.len(), 1);
    }

    #[test]
    fn unknown_node_errors() {
        let g = mini_graph();
        assert!(reachable_leaves(&g, &NodeId::new("missing")).is_err());
    }

    #[test]
    fn rain_level_one_maps_to_twenty() {
        let spec = table1_spec();
        let rain = &spec.key_factor_table.factors[1];
        assert_eq!(rain.name, "Rain level");
        assert_eq!(factor_difficulty(rain, &spec.key_factor_table.grid, 1.0), 20.0);
    }

    #[test]
    fn fog_level_one_maps_to_twenty() {
        let spec = table1_spec();
        let fog = &spec.key_factor_table.factors[2];
        assert_eq!(fog.name, "Fog level");
        assert_eq!(factor_difficulty(fog, &spec.key_factor_table.grid, 1.0), 20.0);
    }

    #[test]
    fn altitude_interpolates_between_columns() {
        // 3000 m sits between the 2900->50 and 3600->60 breakpoints:
        // 50 + 10 * (3000 - 2900) / (3600 - 2900).
        let spec = table1_spec();
        let alt = &spec.key_factor_table.factors[3];
        let want = 50.0 + 10.0 * (3000.0 - 2900.0) / (3600.0 - 2900.0);
        let got = factor_difficulty(alt, &spec.key_factor_table.grid, 3000.0);
        assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
        assert!((got - 51.428_571_428_571_43).abs() < 1e-9);
    }

    #[test]
    fn plateau_resolves_to_lowest_grid_value() {
        // The rain row holds 4 in both the 40 and 50 columns.
        let spec = table1_spec();
        let rain = &spec.key_factor_table.factors[1];
        assert_eq!(factor_difficulty(rain, &spec.key_factor_table.grid, 4.0), 40.0);
    }

    #[test]
    fn out_of_range_raw_clamps() {
        let spec = table1_spec();
        let rain = &spec.key_factor_table.factors[1];
        let grid = &spec.key_factor_table.grid;
        assert_eq!(factor_difficulty(rain, grid, -3.0), 10.0);
        assert_eq!(factor_difficulty(rain, grid, 40.0), 100.0);
    }

    #[test]
    fn decreasing_row_interpolates_and_clamps() {
        let row = KeyFactorRow {
            name: "Concealment".into(),
            unit: "fraction".into(),
            direction: Direction::Decreasing,
            raw_values: vec![1.0, 0.5, 0.1],
        };
        let grid = [10.0, 60.0, 100.0];
        assert_eq!(factor_difficulty(&row, &grid, 1.0), 10.0);
        assert_eq!(factor_difficulty(&row, &grid, 0.5), 60.0);
        assert_eq!(factor_difficulty(&row, &grid, 0.1), 100.0);
        assert_eq!(factor_difficulty(&row, &grid, 2.0), 10.0);
        assert_eq!(factor_difficulty(&row, &grid, 0.05), 100.0);
        let mid = factor_difficulty(&row, &grid, 0.75);
        assert!((mid - 35.0).abs() < 1e-12);
    }

    #[test]
    fn worked_example_difficulty_twenty_bound_by_rain() {
        let spec = table1_spec();
        let params = num_params(&[
            ("hours_till_solar_noon", 5.0),
            ("rain_level", 1.0),
            ("fog_level", 2.0),
            ("uav_altitude", 3000.0),
        ]);
        let (d, binding) = observable_difficulty_binding(&spec, &params).unwrap();
        assert_eq!(d, 20.0);
        assert_eq!(binding, "Rain level");
    }

    #[test]
    fn worked_example_swapped_binds_fog() {
        let spec = table1_spec();
        let params = num_params(&[
            ("hours_till_solar_noon", 5.0),
            ("rain_level", 2.0),
            ("fog_level", 1.0),
            ("uav_altitude", 3000.0),
        ]);
        let (d, binding) = observable_difficulty_binding(&spec, &params).unwrap();
        assert_eq!(d, 20.0);
        assert_eq!(binding, "Fog level");
    }

    #[test]
    fn all_factors_at_top_column_give_hundred() {
        let spec = table1_spec();
        let params = num_params(&[
            ("hours_till_solar_noon", 8.0),
            ("rain_level", 9.0),
            ("fog_level", 9.0),
            ("uav_altitude", 6000.0),
        ]);
        assert_eq!(observable_difficulty(&spec, &params).unwrap(), 100.0);
    }

    #[test]
    fn missing_parameter_errors() {
        let spec = table1_spec();
        let params = num_params(&[("rain_level", 1.0)]);
        let err = observable_difficulty(&spec, &params).unwrap_err();
        assert!(matches!(err, GraphError::MissingParameter { .. }));
    }

    #[test]
    fn param_key_normalizes() {
        assert_eq!(param_key("Rain level"), "rain_level");
        assert_eq!(param_key("UAV altitude"), "uav_altitude");
        assert_eq!(param_key("Hours till solar noon"), "hours_till_solar_noon");
        assert_eq!(param_key("  odd -- name  "), "odd_name");
    }

    #[test]
    fn random_valid_graphs_pass_and_injected_violations_fail() {
        use crate::rng::SeedStream;
        use crate::testutil::random_graph;

        let mut stream = SeedStream::new(77);
        for round in 0..100 {
            let g = random_graph(&mut stream, 8);
            assert!(validate_graph(&g).is_valid(), "round {round}: {}", validate_graph(&g));

            // All observables are reachable from the root.
            let leaves = reachable_leaves(&g, &g.root).unwrap();
            let all: BTreeSet<NodeId> = g.observable_ids().cloned().collect();
            assert_eq!(leaves, all, "round {round}");

            // Inject one violation and the report must flag it.
            let mut broken = g.clone();
            match stream.next_below(4) {
                0 => {
                    // Reverse an edge below the root: level-order violation.
                    let edge = broken
                        .edges
                        .iter()
                        .find(|(p, _)| p.as_str() != "REBAR")
                        .cloned()
                        .unwrap();
                    broken.edges.remove(&edge);
                    broken.edges.insert((edge.1, edge.0));
                }
                1 => {
                    // Cycle back up to the root.
                    let leaf = all.iter().next().unwrap().clone();
                    broken.edges.insert((leaf, broken.root.clone()));
                }
                2 => {
                    // Orphan an observable spec.
                    let leaf = all.iter().next().unwrap().clone();
                    broken.observables.remove(&leaf);
                }
                _ => {
                    // Corrupt a principle label.
                    let p = broken
                        .nodes
                        .values_mut()
                        .find(|n| n.level == NodeLevel::Principle)
                        .unwrap();
                    p.label = "Speedy".into();
                }
            }
            assert!(!validate_graph(&broken).is_valid(), "round {round}: violation not caught");
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_row() -> impl Strategy<Value = (KeyFactorRow, Vec<f64>)> {
            // Strictly increasing grid and monotone raw values of matching length.
            (2usize..8).prop_flat_map(|n| {
                (
                    proptest::collection::vec(0.0f64..10.0, n),
                    proptest::collection::vec(0.01f64..5.0, n - 1),
                )
                    .prop_map(move |(raw_incs, grid_incs)| {
                        let mut raw = Vec::with_capacity(n);
                        let mut acc = 0.0;
                        for inc in &raw_incs {
                            acc += inc; // may repeat when inc == 0
                            raw.push(acc);
                        }
                        let mut grid = Vec::with_capacity(n);
                        let mut g = 5.0;
                        grid.push(g);
                        for inc in &grid_incs {
                            g += inc;
                            grid.push(g.min(100.0));
                        }
                        // keep strictly increasing after the clamp
                        for i in 1..grid.len() {
                            if grid[i] <= grid[i - 1] {
                                grid[i] = grid[i - 1] + 0.001;
                            }
                        }
                        let row = KeyFactorRow {
                            name: "x".into(),
                            unit: "u".into(),
                            direction: Direction::Increasing,
                            raw_values: raw,
                        };
                        (row, grid)
                    })
            })
        }

        proptest! {
            #[test]
            fn monotone_and_bounded((row, grid) in arb_row(), probes in proptest::collection::vec(-5.0f64..60.0, 8)) {
                let lo = grid[0];
                let hi = grid[grid.len() - 1];
                let mut sorted = probes.clone();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mut prev = f64::NEG_INFINITY;
                for raw in sorted {
                    let d = factor_difficulty(&row, &grid, raw);
                    prop_assert!(d >= lo - 1e-9 && d <= hi + 1e-9);
                    prop_assert!(d >= prev - 1e-9, "not monotone: {} after {}", d, prev);
                    prev = d;
                }
            }

            #[test]
            fn min_dominance(rain in 0.0f64..12.0, fog in 0.0f64..12.0, hours in 0.0f64..9.0, alt in 0.0f64..7000.0) {
                let spec = table1_spec();
                let params = num_params(&[
                    ("hours_till_solar_noon", hours),
                    ("rain_level", rain),
                    ("fog_level", fog),
                    ("uav_altitude", alt),
                ]);
                let d = observable_difficulty(&spec, &params).unwrap();
                for row in &spec.key_factor_table.factors {
                    let raw = match params.get(&row.param_key()).unwrap() {
                        ParamValue::Num(v) => *v,
                        _ => unreachable!(),
                    };
                    let fd = factor_difficulty(row, &spec.key_factor_table.grid, raw);
                    prop_assert!(d <= fd + 1e-12);
                }
            }
        }
    }
}
