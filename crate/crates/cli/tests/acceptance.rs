//! Acceptance suite: every release criterion, one test each, one PASS line
//! each (run with `--nocapture` to see them).
//!
//! Tolerances are pinned in the assertions themselves; nothing here is
//! calibrated after the fact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rebar_cli::manifest::Manifest;
use rebar_cli::stages;
use rebar_cli::OutLayout;
use rebar_core::graph::{
    observable_difficulty, observable_difficulty_binding, parse_graph, reachable_leaves,
    DecompositionGraph, Direction, EvaluatorKind, KeyFactorRow, KeyFactorTable, Node, NodeId,
    NodeLevel, ObservableSpec,
};
use rebar_core::orchestrator::{expand, signature_key, Strategy};
use rebar_core::rng::SeedStream;
use rebar_core::scenario::{parse_scenario, ParamValue, Sidecar};
use rebar_core::scoring::{
    score_run, NodeScore, ObservableOutcome, Score, PARTIAL_CREDIT_SCALE,
};
use rebar_core::simkit::{
    detection_probability, DetectionParams, Sensor, Sighting, Weather,
};

fn repo_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn shipped_graph() -> DecompositionGraph {
    parse_graph(&std::fs::read(repo_path("scenarios/graph.json")).unwrap()).unwrap()
}

fn num_params(entries: &[(&str, f64)]) -> BTreeMap<String, ParamValue> {
    entries
        .iter()
        .map(|(k, v)| (k.to_string(), ParamValue::Num(*v)))
        .collect()
}

fn pass(criterion: &str, detail: String, started: Instant) {
    println!(
        "[{criterion}] PASS ({:.2} s) {detail}",
        started.elapsed().as_secs_f64()
    );
}

#[test]
fn ac1_table2_exact_reproduction() {
    let started = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let out = OutLayout::new(tmp.path());
    let agg = stages::cmd_score_outcomes(
        &repo_path("scenarios/table2/graph.json"),
        &repo_path("scenarios/table2/outcomes.json"),
        &out,
    )
    .unwrap();

    // Per-run scores for run-2 from the written document.
    let doc: BTreeMap<String, BTreeMap<NodeId, NodeScore>> =
        serde_json::from_slice(&std::fs::read(out.score_file("run-2")).unwrap()).unwrap();
    let run2 = &doc["run-2"];
    let vab1 = &run2[&NodeId::new("VAB1")];
    assert_eq!(vab1.score, Score::value(80.0));
    assert_eq!(vab1.confidence, 0.5);
    let ka1_run2 = &run2[&NodeId::new("KA1")];
    assert_eq!(ka1_run2.score, Score::value(50.0));
    assert!((ka1_run2.confidence - 2.0 / 3.0).abs() < 5e-4); // 66.7%

    let ka1 = &agg.nodes[&NodeId::new("KA1")];
    assert_eq!(ka1.arl_score.get(), Some(40.0)); // 40.0000 exactly
    assert!((ka1.arl_confidence - 0.8333).abs() <= 1e-4);
    assert!(started.elapsed().as_secs_f64() < 1.0, "must finish inside 1 s");
    pass(
        "AC1",
        format!(
            "KA1 run-2 = 50 @ {:.1}%, final ARL {} @ {:.4}",
            ka1_run2.confidence * 100.0,
            ka1.arl_score,
            ka1.arl_confidence
        ),
        started,
    );
}

#[test]
fn ac2_difficulty_worked_example() {
    let started = Instant::now();
    let graph = shipped_graph();
    let spec = graph.spec(&NodeId::new("OBS-09")).unwrap();
    let params = num_params(&[
        ("hours_till_solar_noon", 5.0),
        ("rain_level", 1.0),
        ("fog_level", 2.0),
        ("uav_altitude", 3000.0),
    ]);
    let (d, binding) = observable_difficulty_binding(spec, &params).unwrap();
    assert_eq!(d, 20.0, "difficulty must be 20 exactly");
    assert_eq!(binding, "Rain level");

    let swapped = num_params(&[
        ("hours_till_solar_noon", 5.0),
        ("rain_level", 2.0),
        ("fog_level", 1.0),
        ("uav_altitude", 3000.0),
    ]);
    let (d2, binding2) = observable_difficulty_binding(spec, &swapped).unwrap();
    assert_eq!(d2, 20.0, "swapped difficulty must be 20 exactly");
    assert_eq!(binding2, "Fog level");
    assert!(started.elapsed().as_secs_f64() < 1.0, "must finish inside 1 s");
    pass(
        "AC2",
        format!("20 bound by {binding}, swapped pair 20 bound by {binding2}"),
        started,
    );
}

#[test]
fn ac3_difficulty_is_agent_independent() {
    let started = Instant::now();
    let graph = shipped_graph();
    let mut sidecar = Sidecar::default();
    for (k, v) in [("civ_density", 200.0), ("civ_proximity", 150.0), ("concealment", 0.7)] {
        sidecar.fixed.insert(k.into(), ParamValue::Num(v));
    }
    let base = parse_scenario(
        "storm of [0-9] rain_level, [0-9] fog_level, [0-8] hours_till_solar_noon, \
         flying at [500-6000] uav_altitude.",
        &sidecar,
    )
    .unwrap();
    let campaign = expand(
        &base,
        Strategy::RandomSample { k: 100, range_steps: Some(4) },
        2024,
        &graph,
    )
    .unwrap();
    assert_eq!(campaign.realizations.len(), 100);

    // A small fixed scene; the agents differ in every engagement constant.
    let scene = rebar_core::scene::Scene {
        extent_m: [200.0, 200.0],
        cued_region: None,
        regions: BTreeMap::new(),
        actors: vec![
            rebar_core::scene::Actor {
                id: "uav_start-0".into(),
                role: rebar_core::scene::ActorRole::UavStart,
                position: [10.0, 10.0],
                radius_m: 1.0,
                concealment: 1.0,
            },
            rebar_core::scene::Actor {
                id: "target-0".into(),
                role: rebar_core::scene::ActorRole::Target,
                position: [100.0, 100.0],
                radius_m: 4.0,
                concealment: 0.7,
            },
            rebar_core::scene::Actor {
                id: "bystander-0".into(),
                role: rebar_core::scene::ActorRole::Bystander,
                position: [120.0, 100.0],
                radius_m: 1.0,
                concealment: 1.0,
            },
        ],
    };
    let agent_a = rebar_core::simkit::SimConfig { duration_s: 60.0, ..Default::default() };
    let mut agent_b = agent_a.clone();
    agent_b.engagement.conf_floor = 0.05;
    agent_b.engagement.consecutive_frames = 1;
    agent_b.engagement.min_viewpoints = 1;
    agent_b.engagement.bystander_safety_radius_m = 0.0;

    for realization in &campaign.realizations {
        let before = &realization.difficulty_signature;
        for config in [&agent_a, &agent_b] {
            let mut per_run = config.clone();
            per_run.apply_params(&realization.params);
            let _ = rebar_core::simkit::run(&scene, &per_run, realization.seed);
            for (obs, spec) in &graph.observables {
                let recomputed = observable_difficulty(spec, &realization.params).unwrap();
                assert_eq!(
                    before[obs], recomputed,
                    "{}: signature changed for {obs}",
                    realization.id
                );
            }
        }
    }
    pass(
        "AC3",
        "100 realizations, signatures identical before and after simulation under two agents"
            .to_string(),
        started,
    );
}

#[test]
fn ac4_table3_expansion_and_buckets() {
    let started = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let out = OutLayout::new(tmp.path());
    let base = stages::cmd_parse(
        &repo_path("scenarios/table3.txt"),
        Some(&repo_path("scenarios/table3.sidecar.json")),
        &out.base_file(),
    )
    .unwrap();
    let graph = shipped_graph();
    let campaign = expand(&base, Strategy::FullFactorial, 42, &graph).unwrap();

    assert_eq!(campaign.realizations.len(), 72, "4*2*3*3 must expand to 72");
    let distinct: std::collections::BTreeSet<String> = campaign
        .realizations
        .iter()
        .map(|r| serde_json::to_string(&r.params).unwrap())
        .collect();
    assert_eq!(distinct.len(), 72, "realizations must be pairwise distinct");

    // Buckets partition the realizations and every bucket is
    // signature-homogeneous.
    let by_id: BTreeMap<&String, &rebar_core::orchestrator::Realization> =
        campaign.realizations.iter().map(|r| (&r.id, r)).collect();
    let mut seen = std::collections::BTreeSet::new();
    for (key, ids) in &campaign.buckets {
        assert!(!ids.is_empty());
        for id in ids {
            assert!(seen.insert(id.clone()), "{id} appears in two buckets");
            assert_eq!(&signature_key(&by_id[id].difficulty_signature), key);
        }
    }
    assert_eq!(seen.len(), 72);
    pass(
        "AC4",
        format!("72 distinct realizations in {} buckets", campaign.buckets.len()),
        started,
    );
}

/// Self-contained random layered DAG for the rollup oracle.
fn random_dag(stream: &mut SeedStream) -> DecompositionGraph {
    let mk = |id: String, level, label: &str| Node {
        id: NodeId::new(id),
        level,
        label: label.into(),
    };
    let spec = |id: String| ObservableSpec {
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
    let labels = ["Responsible", "Equitable", "Traceable", "Reliable", "Governable"];
    let counts = [
        1 + stream.next_below(3) as usize, // principles
        1 + stream.next_below(5) as usize, // key attributes
        1 + stream.next_below(6) as usize, // VABs
        1 + stream.next_below(10) as usize, // observables (<= 10 leaves)
    ];
    let mut nodes = vec![mk("REBAR".into(), NodeLevel::Root, "REBAR")];
    let tags = ["P", "KA", "VAB", "OBS"];
    let levels = [
        NodeLevel::Principle,
        NodeLevel::KeyAttribute,
        NodeLevel::Vab,
        NodeLevel::Observable,
    ];
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
        // Every child gets 1-2 parents; every parent at least one child.
        for c in 0..children {
            let p = stream.next_below(parents as u64) as usize;
            edges.push((NodeId::new(format!("{}{p}", tags[t])), NodeId::new(format!("{}{c}", tags[t + 1]))));
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
    let observables = (0..counts[3]).map(|i| spec(format!("OBS{i}"))).collect();
    DecompositionGraph::from_parts(nodes, edges, observables).unwrap()
}

#[test]
fn ac5_rollup_matches_brute_force_oracle() {
    let started = Instant::now();
    let mut stream = SeedStream::new(0x5EED);
    let mut max_nodes = 0usize;
    for round in 0..500 {
        let graph = random_dag(&mut stream);
        max_nodes = max_nodes.max(graph.nodes.len());
        assert!(graph.nodes.len() <= 30);
        let outcomes: Vec<ObservableOutcome> = graph
            .observable_ids()
            .map(|id| {
                let x = stream.next_f64();
                let d = (stream.next_below(10) * 10 + 10) as f64;
                ObservableOutcome::from_measurement(id.clone(), x, 0.5, false, d)
            })
            .collect();
        let rollup = score_run(&graph, &outcomes, "r").unwrap();

        // Independent oracle: per node, DFS-enumerate reachable leaves and
        // fold min / count passes directly.
        let by_obs: BTreeMap<&NodeId, &ObservableOutcome> =
            outcomes.iter().map(|o| (&o.observable, o)).collect();
        for (node, ns) in &rollup {
            let leaves = reachable_leaves(&graph, node).unwrap();
            let mut min: Option<f64> = None;
            let mut passed = 0usize;
            for leaf in &leaves {
                let o = by_obs[leaf];
                if let Some(v) = o.s.get() {
                    min = Some(min.map_or(v, |m: f64| m.min(v)));
                }
                passed += o.passed as usize;
            }
            let want = min.map(Score::value).unwrap_or_else(Score::nan);
            assert_eq!(ns.score, want, "round {round}, node {node}");
            let want_conf = passed as f64 / leaves.len() as f64;
            assert_eq!(ns.confidence, want_conf, "round {round}, node {node}");
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "must finish inside 10 s, took {elapsed:.2}");
    pass(
        "AC5",
        format!("500 random DAGs (max {max_nodes} nodes), scores and confidences exact"),
        started,
    );
}

#[test]
fn ac6_end_to_end_determinism_and_runtime() {
    let started = Instant::now();
    let load = |out: &Path| {
        let mut m = Manifest::load(&repo_path("scenarios/table3.manifest.json")).unwrap();
        m.out = out.to_path_buf();
        m
    };
    let tmp = tempfile::tempdir().unwrap();
    let (dir_a, dir_b, dir_c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));

    // Runtime budget: one 72-realization campaign, 10-minute missions at
    // 1-second ticks, under 5 minutes of wall clock.
    let clock = Instant::now();
    let mut first = load(&dir_a);
    first.jobs = 1;
    let summary = stages::cmd_run(&first).unwrap();
    let campaign_secs = clock.elapsed().as_secs_f64();
    assert_eq!(summary.realizations, 72);
    assert!(campaign_secs < 300.0, "campaign took {campaign_secs:.1} s");
    for dir in ["specs", "logs", "scores"] {
        let count = std::fs::read_dir(dir_a.join(dir)).unwrap().count();
        assert_eq!(count, 72, "expected one {dir} artifact per realization");
    }

    let mut second = load(&dir_b);
    second.jobs = 1;
    stages::cmd_run(&second).unwrap();
    let mut parallel = load(&dir_c);
    parallel.jobs = 8;
    stages::cmd_run(&parallel).unwrap();

    for file in ["report.json", "report.svg", "aggregate.json", "campaign.json"] {
        let a = std::fs::read(dir_a.join(file)).unwrap();
        let b = std::fs::read(dir_b.join(file)).unwrap();
        let c = std::fs::read(dir_c.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs across identical runs");
        assert_eq!(a, c, "{file} differs between jobs=1 and jobs=8");
    }
    // Spot-check a few raw logs across the parallelism change too.
    for id in ["r00000", "r00035", "r00071"] {
        let a = std::fs::read(OutLayout::new(&dir_a).log_file(id)).unwrap();
        let c = std::fs::read(OutLayout::new(&dir_c).log_file(id)).unwrap();
        assert_eq!(a, c, "log {id} differs between jobs=1 and jobs=8");
    }
    pass(
        "AC6",
        format!("byte-identical reports across reruns and jobs 1 vs 8; campaign in {campaign_secs:.1} s"),
        started,
    );
}

#[test]
fn ac7_bystander_marking_shape() {
    let started = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let mut m = Manifest::load(&repo_path("scenarios/bystander_stress.manifest.json")).unwrap();
    m.out = tmp.path().to_path_buf();
    stages::cmd_run(&m).unwrap();
    let agg: rebar_core::scoring::AggregateDoc =
        serde_json::from_slice(&std::fs::read(OutLayout::new(tmp.path()).aggregate_file()).unwrap())
            .unwrap();
    let ka18 = agg.nodes[&NodeId::new("KA-18")].arl_confidence;
    let ka20 = agg.nodes[&NodeId::new("KA-20")].arl_confidence;
    assert!(
        ka18 < 0.5,
        "KA-18 confidence {ka18} should be low with bystanders inside the audited radius"
    );
    assert!(ka20 > 0.8, "KA-20 confidence {ka20} should stay high under easy weather");
    pass(
        "AC7",
        format!("KA-18 confidence {ka18:.3} < 0.5 while KA-20 confidence {ka20:.3} > 0.8"),
        started,
    );
}

#[test]
fn ac8_detection_model_calibration() {
    let started = Instant::now();
    let params = DetectionParams::default();
    let settings = [
        (Weather { rain_level: 0.0, fog_level: 0.0, hours_till_solar_noon: 0.0 }, 500.0, 1.0),
        (Weather { rain_level: 3.0, fog_level: 1.0, hours_till_solar_noon: 2.0 }, 1500.0, 1.0),
        (Weather { rain_level: 5.0, fog_level: 5.0, hours_till_solar_noon: 4.0 }, 3000.0, 0.8),
        (Weather { rain_level: 1.0, fog_level: 2.0, hours_till_solar_noon: 1.0 }, 500.0, 0.5),
        (Weather { rain_level: 8.0, fog_level: 7.0, hours_till_solar_noon: 6.0 }, 5000.0, 1.0),
    ];
    for (i, (weather, altitude, concealment)) in settings.iter().enumerate() {
        let p = detection_probability(&params, weather, *altitude, *concealment);
        let sensor = Sensor { params: &params, weather, altitude_m: *altitude };
        let mut hits = 0u32;
        let n = 10_000u64;
        for draw in 0..n {
            let mut stream = SeedStream::for_actor_tick(31_000 + i as u64, 0, draw);
            let sighting = Sighting { bearing_deg: 0.0, range_m: 20.0 };
            if sensor
                .detect("a", rebar_core::scene::ActorRole::Target, *concealment, sighting, &mut stream)
                .is_some()
            {
                hits += 1;
            }
        }
        let rate = hits as f64 / n as f64;
        assert!(
            (rate - p).abs() <= 0.02,
            "setting {i}: empirical {rate:.4} vs closed form {p:.4}"
        );
    }

    // Monotone degradation across every adjacent rain/fog level pair.
    for level in 0..9 {
        let base = Weather { rain_level: level as f64, fog_level: 0.0, hours_till_solar_noon: 0.0 };
        let worse = Weather { rain_level: (level + 1) as f64, ..base };
        assert!(
            detection_probability(&params, &worse, 500.0, 1.0)
                <= detection_probability(&params, &base, 500.0, 1.0)
        );
        let base = Weather { rain_level: 0.0, fog_level: level as f64, hours_till_solar_noon: 0.0 };
        let worse = Weather { fog_level: (level + 1) as f64, ..base };
        assert!(
            detection_probability(&params, &worse, 500.0, 1.0)
                <= detection_probability(&params, &base, 500.0, 1.0)
        );
    }
    pass(
        "AC8",
        "5 settings within +/-2% of closed form; rain/fog degradation monotone over levels 0-9"
            .to_string(),
        started,
    );
}

#[test]
fn ac9_partial_credit_bound() {
    let started = Instant::now();
    let mut stream = SeedStream::new(0xCAFE);
    let mut passes = 0u32;
    for _ in 0..1000 {
        let x = stream.next_f64();
        let tau = stream.next_f64();
        let d = stream.next_f64() * 100.0;
        let outcome =
            ObservableOutcome::from_measurement(NodeId::new("obs"), x, tau, true, d);
        if x >= tau {
            passes += 1;
            let expected = d + PARTIAL_CREDIT_SCALE * (x - tau);
            assert_eq!(outcome.s, Score::value(expected), "s must equal d + 4(x - tau) exactly");
            assert!(outcome.delta >= 0.0);
            assert!(outcome.delta <= PARTIAL_CREDIT_SCALE * (1.0 - tau));
        } else {
            assert!(outcome.s.is_nan(), "failures must score the NaN sentinel");
            assert_eq!(outcome.delta, 0.0);
        }
    }
    assert!(passes > 0 && passes < 1000, "both branches must be exercised");
    pass(
        "AC9",
        format!("1000 outcomes ({passes} passes): s = d + 4(x - tau) exact, delta within [0, 4(1 - tau)]"),
        started,
    );
}
