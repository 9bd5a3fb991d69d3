//! Shared fixtures for unit tests.

use std::collections::BTreeMap;

use crate::graph::{
    DecompositionGraph, Direction, EvaluatorKind, KeyFactorRow, KeyFactorTable, Node, NodeId,
    NodeLevel, ObservableSpec,
};
use crate::rng::SeedStream;
use crate::scenario::ParamValue;

pub fn num_params(entries: &[(&str, f64)]) -> BTreeMap<String, ParamValue> {
    entries
        .iter()
        .map(|(k, v)| (k.to_string(), ParamValue::Num(*v)))
        .collect()
}

/// The vehicle-detection calibration table: grid 10..100 with hours, rain
/// (plateau at 4), fog, and altitude rows.
pub fn table1_spec() -> ObservableSpec {
    let row = |name: &str, unit: &str, raw: Vec<f64>| KeyFactorRow {
        name: name.into(),
        unit: unit.into(),
        direction: Direction::Increasing,
        raw_values: raw,
    };
    ObservableSpec {
        id: NodeId::new("OBS-09"),
        tau: 0.5,
        graded: true,
        metadata: [("detection_conf_threshold".to_string(), 0.35)]
            .into_iter()
            .collect(),
        evaluator: EvaluatorKind::DetectionRate,
        key_factor_table: KeyFactorTable {
            grid: vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0],
            factors: vec![
                row(
                    "Hours till solar noon",
                    "h",
                    vec![0.0, 0.89, 1.78, 2.67, 3.56, 4.44, 5.33, 6.22, 7.11, 8.0],
                ),
                row(
                    "Rain level",
                    "level",
                    vec![0.0, 1.0, 2.0, 4.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
                ),
                row(
                    "Fog level",
                    "level",
                    vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
                ),
                row(
                    "UAV altitude",
                    "m",
                    vec![500.0, 1100.0, 1700.0, 2300.0, 2900.0, 3600.0, 4200.0, 4800.0, 5400.0, 6000.0],
                ),
            ],
        },
    }
}

/// The two-run scoring example's graph shape:
/// KA1 -> {VAB1 -> {OBS1, OBS2}, VAB2 -> {OBS3}}.
pub fn table2_graph() -> DecompositionGraph {
    let mk = |id: &str, level, label: &str| Node {
        id: NodeId::new(id),
        level,
        label: label.into(),
    };
    let nodes = vec![
        mk("REBAR", NodeLevel::Root, "REBAR"),
        mk("P1", NodeLevel::Principle, "Reliable"),
        mk("KA1", NodeLevel::KeyAttribute, "KA1"),
        mk("VAB1", NodeLevel::Vab, "VAB1"),
        mk("VAB2", NodeLevel::Vab, "VAB2"),
        mk("OBS1", NodeLevel::Observable, "OBS1"),
        mk("OBS2", NodeLevel::Observable, "OBS2"),
        mk("OBS3", NodeLevel::Observable, "OBS3"),
    ];
    let edges = [
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
    .collect();
    let spec = |id: &str| ObservableSpec {
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
    };
    DecompositionGraph::from_parts(nodes, edges, vec![spec("OBS1"), spec("OBS2"), spec("OBS3")])
        .unwrap()
}

pub fn dummy_observable(id: &str) -> ObservableSpec {
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

/// Random valid layered DAG with many-to-many edges and `max_leaves`
/// observables at most.
pub fn random_graph(stream: &mut SeedStream, max_leaves: usize) -> DecompositionGraph {
    let mk = |id: String, level, label: &str| Node {
        id: NodeId::new(id),
        level,
        label: label.into(),
    };
    let labels = ["Responsible", "Equitable", "Traceable", "Reliable", "Governable"];
    let counts = [
        1 + stream.next_below(3) as usize,
        1 + stream.next_below(4) as usize,
        1 + stream.next_below(5) as usize,
        1 + stream.next_below(max_leaves as u64) as usize,
    ];
    let tags = ["P", "KA", "VAB", "OBS"];
    let levels = [
        NodeLevel::Principle,
        NodeLevel::KeyAttribute,
        NodeLevel::Vab,
        NodeLevel::Observable,
    ];
    let mut nodes = vec![mk("REBAR".into(), NodeLevel::Root, "REBAR")];
    for (t, (&n, level)) in counts.iter().zip(levels).enumerate() {
        for i in 0..n {
            let label = if level == NodeLevel::Principle { labels[i % 5] } else { "node" };
            nodes.push(mk(format!("{}{i}", tags[t]), level, label));
        }
    }
    let mut edges: Vec<(NodeId, NodeId)> = (0..counts[0])
        .map(|i| (NodeId::new("REBAR"), NodeId::new(format!("P{i}"))))
        .collect();
    for t in 0..3 {
        let (parents, children) = (counts[t], counts[t + 1]);
        // Every child gets one or two parents; every parent at least one child.
        for c in 0..children {
            let p = stream.next_below(parents as u64) as usize;
            edges.push((
                NodeId::new(format!("{}{p}", tags[t])),
                NodeId::new(format!("{}{c}", tags[t + 1])),
            ));
            if stream.next_below(3) == 0 {
                let p2 = stream.next_below(parents as u64) as usize;
                if p2 != p {
                    edges.push((
                        NodeId::new(format!("{}{p2}", tags[t])),
                        NodeId::new(format!("{}{c}", tags[t + 1])),
                    ));
                }
            }
        }
        for p in 0..parents {
            let parent = NodeId::new(format!("{}{p}", tags[t]));
            if !edges.iter().any(|(a, _)| *a == parent) {
                let c = stream.next_below(children as u64) as usize;
                edges.push((parent, NodeId::new(format!("{}{c}", tags[t + 1]))));
            }
        }
    }
    let observables = (0..counts[3])
        .map(|i| dummy_observable(&format!("OBS{i}")))
        .collect();
    DecompositionGraph::from_parts(nodes, edges, observables).unwrap()
}
