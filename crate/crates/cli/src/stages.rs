//! The six pipeline stages plus the end-to-end runner.
//!
//! Stages communicate only through the artifact tree, so running them as
//! separate subcommands produces byte-identical output to one `run`. All of
//! them are idempotent: expand and score overwrite with identical bytes,
//! simulate skips realizations whose logs already exist and verify.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use rebar_core::graph::{parse_graph, validate_graph, DecompositionGraph, NodeId, ValidationReport};
use rebar_core::orchestrator::{expand, Campaign, SimSpecDoc, Strategy};
use rebar_core::report::{build_report, render_svg, BucketReport};
use rebar_core::scenario::{parse_scenario, BaseSimSpec, Sidecar};
use rebar_core::scene::place_realization;
use rebar_core::scoring::{
    aggregate, evaluate_observable, score_run, AggregateDoc, NodeScore, ObservableOutcome,
    OutcomesDoc, ScoreError,
};
use rebar_core::simkit::{run as run_sim, RunLog, SimConfig};

use crate::manifest::Manifest;
use crate::{parallel_indexed, read_bytes, read_json, read_text, write_json, write_text, OutLayout, StageError};

/// Parse and validate a graph-config file.
pub fn load_graph(path: &Path) -> Result<DecompositionGraph, StageError> {
    let bytes = read_bytes(path)?;
    Ok(parse_graph(&bytes)?)
}

/// Validate a graph file, returning the full violation report.
pub fn cmd_validate(graph_path: &Path) -> Result<ValidationReport, StageError> {
    // Parse without the validity gate so every violation is reported, not
    // just the first.
    let bytes = read_bytes(graph_path)?;
    match parse_graph(&bytes) {
        Ok(graph) => Ok(validate_graph(&graph)),
        Err(rebar_core::graph::GraphError::Invalid(report)) => Ok(report),
        Err(other) => Err(other.into()),
    }
}

/// Parse a scenario (plus optional sidecar) and write `base.json`.
pub fn cmd_parse(
    scenario_path: &Path,
    sidecar_path: Option<&Path>,
    out_file: &Path,
) -> Result<BaseSimSpec, StageError> {
    let text = read_text(scenario_path)?;
    let sidecar = match sidecar_path {
        Some(p) => read_json::<Sidecar>(p)?,
        None => Sidecar::default(),
    };
    let mut base = parse_scenario(&text, &sidecar)?;
    if base.id == "scenario" {
        if let Some(stem) = scenario_path.file_stem().and_then(|s| s.to_str()) {
            base.id = stem.to_string();
        }
    }
    write_json(out_file, &base)?;
    Ok(base)
}

/// Expand `base.json` into `campaign.json` plus one placed SimSpec per
/// realization.
pub fn cmd_expand(
    base_file: &Path,
    strategy: Strategy,
    campaign_seed: u64,
    graph_path: &Path,
    out: &OutLayout,
    max_attempts: u32,
) -> Result<Campaign, StageError> {
    let base: BaseSimSpec = read_json(base_file)?;
    let graph = load_graph(graph_path)?;
    let campaign = expand(&base, strategy, campaign_seed, &graph)?;
    let recipe = base
        .scene
        .as_ref()
        .ok_or(rebar_core::scene::SceneError::NoRecipe)?;
    for realization in &campaign.realizations {
        let scene = place_realization(
            recipe,
            &base.constraints,
            &realization.params,
            realization.seed,
            max_attempts,
        )
        .map_err(|e| match e {
            rebar_core::scene::SceneError::Unsatisfiable { .. } => StageError::Placement(format!(
                "realization {}: {e}",
                realization.id
            )),
            other => StageError::from(other),
        })?;
        write_json(&out.spec_file(&realization.id), &SimSpecDoc::new(realization, scene))?;
    }
    write_json(&out.campaign_file(), &campaign)?;
    Ok(campaign)
}

/// True when an existing log verifies against its spec: same realization,
/// seed, and effective sim config, with an intact footer. Anything else is
/// stale and gets re-simulated.
fn log_is_current(path: &Path, spec: &SimSpecDoc, expected_config: &SimConfig) -> bool {
    let Ok(text) = std::fs::read_to_string(path) else {
        return false;
    };
    match RunLog::from_lines(&text) {
        Ok(log) => {
            log.realization_id == spec.id
                && log.seed == spec.seed
                && &log.config == expected_config
        }
        Err(_) => false,
    }
}

/// Simulate every realization, in parallel, skipping up-to-date logs.
/// Returns (simulated, skipped).
pub fn cmd_simulate(
    sim_base: &SimConfig,
    out: &OutLayout,
    jobs: usize,
) -> Result<(usize, usize), StageError> {
    let campaign: Campaign = read_json(&out.campaign_file())?;
    let ids: Vec<String> = campaign.realizations.iter().map(|r| r.id.clone()).collect();
    let skipped = Mutex::new(0usize);
    parallel_indexed(ids.len(), jobs, |i| {
        let spec: SimSpecDoc = read_json(&out.spec_file(&ids[i]))?;
        let log_path = out.log_file(&spec.id);
        let mut config = sim_base.clone();
        config.apply_params(&spec.params);
        if log_is_current(&log_path, &spec, &config) {
            *skipped.lock().expect("counter poisoned") += 1;
            return Ok(());
        }
        let mut log = run_sim(&spec.scene, &config, spec.seed);
        log.realization_id = spec.id.clone();
        write_text(&log_path, &log.to_lines())
    })?;
    let skipped = skipped.into_inner().expect("counter poisoned");
    Ok((ids.len() - skipped, skipped))
}

fn score_one_run(
    graph: &DecompositionGraph,
    log: &RunLog,
    signature: &BTreeMap<NodeId, f64>,
) -> Result<BTreeMap<NodeId, NodeScore>, StageError> {
    let mut outcomes: Vec<ObservableOutcome> = Vec::new();
    for (obs_id, spec) in &graph.observables {
        let d = signature.get(obs_id).copied().ok_or_else(|| {
            StageError::Validation(format!(
                "realization {} has no difficulty for {obs_id}; its key factors are unbound",
                log.realization_id
            ))
        })?;
        outcomes.push(evaluate_observable(spec, log, d)?);
    }
    Ok(score_run(graph, &outcomes, &log.realization_id)?)
}

/// Score every run log and write per-run score maps plus the whole-campaign
/// aggregate.
pub fn cmd_score(graph_path: &Path, out: &OutLayout, jobs: usize) -> Result<AggregateDoc, StageError> {
    let graph = load_graph(graph_path)?;
    let campaign: Campaign = read_json(&out.campaign_file())?;
    parallel_indexed(campaign.realizations.len(), jobs, |i| {
        let realization = &campaign.realizations[i];
        let log = RunLog::from_lines(&read_text(&out.log_file(&realization.id))?)?;
        let scores = score_one_run(&graph, &log, &realization.difficulty_signature)?;
        let doc: BTreeMap<&str, &BTreeMap<NodeId, NodeScore>> =
            [(realization.id.as_str(), &scores)].into_iter().collect();
        write_json(&out.score_file(&realization.id), &doc)
    })?;

    // The aggregate is recomputed from the written documents, so every
    // reported number re-derives from the score files alone.
    let mut run_maps = Vec::with_capacity(campaign.realizations.len());
    for realization in &campaign.realizations {
        run_maps.push(load_score_file(&out.score_file(&realization.id), &realization.id)?);
    }
    let nodes = aggregate(&run_maps, "all")?;
    let doc = AggregateDoc {
        bucket: "all".to_string(),
        runs: run_maps.len(),
        nodes,
    };
    write_json(&out.aggregate_file(), &doc)?;
    Ok(doc)
}

/// Score a synthetic outcomes fixture instead of run logs.
pub fn cmd_score_outcomes(
    graph_path: &Path,
    outcomes_file: &Path,
    out: &OutLayout,
) -> Result<AggregateDoc, StageError> {
    let graph = load_graph(graph_path)?;
    let doc: OutcomesDoc = read_json(outcomes_file)?;
    if doc.runs.is_empty() {
        return Err(ScoreError::NoRuns.into());
    }
    let mut run_maps = Vec::with_capacity(doc.runs.len());
    for run in &doc.runs {
        let outcomes: Vec<ObservableOutcome> = run
            .outcomes
            .iter()
            .cloned()
            .map(|raw| raw.into_outcome())
            .collect();
        let scores = score_run(&graph, &outcomes, &run.run_id)?;
        let file: BTreeMap<&str, &BTreeMap<NodeId, NodeScore>> =
            [(run.run_id.as_str(), &scores)].into_iter().collect();
        write_json(&out.score_file(&run.run_id), &file)?;
        run_maps.push(scores);
    }
    let nodes = aggregate(&run_maps, "all")?;
    let doc = AggregateDoc {
        bucket: "all".to_string(),
        runs: run_maps.len(),
        nodes,
    };
    write_json(&out.aggregate_file(), &doc)?;
    Ok(doc)
}

fn load_score_file(path: &Path, run_id: &str) -> Result<BTreeMap<NodeId, NodeScore>, StageError> {
    let mut doc: BTreeMap<String, BTreeMap<NodeId, NodeScore>> = read_json(path)?;
    doc.remove(run_id).ok_or_else(|| {
        StageError::Validation(format!("{}: missing run key {run_id}", path.display()))
    })
}

/// Build per-bucket reports and render the SVG summary.
pub fn cmd_report(
    graph_path: &Path,
    out: &OutLayout,
    node_filter: Option<&[NodeId]>,
    bucket_top: Option<usize>,
) -> Result<Vec<BucketReport>, StageError> {
    let graph = load_graph(graph_path)?;
    let campaign: Campaign = read_json(&out.campaign_file())?;
    let mut scores_by_run = BTreeMap::new();
    for realization in &campaign.realizations {
        scores_by_run.insert(
            realization.id.clone(),
            load_score_file(&out.score_file(&realization.id), &realization.id)?,
        );
    }
    let reports = build_report(&graph, &campaign, &scores_by_run, bucket_top)?;
    write_json(&out.report_file(), &reports)?;
    let svg = render_svg(&reports, node_filter)?;
    write_text(&out.svg_file(), &svg)?;
    Ok(reports)
}

/// One stage's summary line for the runner output.
pub struct RunSummary {
    pub realizations: usize,
    pub buckets: usize,
    pub simulated: usize,
    pub skipped: usize,
    pub reports: usize,
}

/// The whole pipeline: validate, parse, expand, simulate, score, report.
pub fn cmd_run(manifest: &Manifest) -> Result<RunSummary, StageError> {
    let report = cmd_validate(&manifest.graph)?;
    if !report.is_valid() {
        return Err(StageError::Validation(format!(
            "graph {}:\n{report}",
            manifest.graph.display()
        )));
    }
    let out = OutLayout::new(&manifest.out);
    cmd_parse(&manifest.scenario, manifest.sidecar.as_deref(), &out.base_file())?;
    let campaign = cmd_expand(
        &out.base_file(),
        manifest.strategy()?,
        manifest.campaign_seed,
        &manifest.graph,
        &out,
        manifest.max_attempts,
    )?;
    let (simulated, skipped) = cmd_simulate(&manifest.sim, &out, manifest.jobs)?;
    cmd_score(&manifest.graph, &out, manifest.jobs)?;
    let node_filter = manifest.node_filter();
    let reports = cmd_report(
        &manifest.graph,
        &out,
        node_filter.as_deref(),
        manifest.bucket_top()?,
    )?;
    Ok(RunSummary {
        realizations: campaign.realizations.len(),
        buckets: campaign.buckets.len(),
        simulated,
        skipped,
        reports: reports.len(),
    })
}
