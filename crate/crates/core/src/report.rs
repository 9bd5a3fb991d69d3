//! Per-bucket report assembly and static SVG rendering.
//!
//! A bucket report carries, per node, the bucket's predicted difficulty (the
//! minimum over the node's reachable observables of the bucket signature),
//! the multi-run ARL score and confidence, and score-distribution quantiles.
//! Rendering draws one panel per node in the style of a dual-axis chart:
//! difficulty dot and score box on the left 0-104 axis, confidence bar on the
//! right 0-1 axis, with the run count annotated. Output is plain SVG text,
//! byte-stable for fixed input.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{reachable_leaves, DecompositionGraph, NodeId};
use crate::orchestrator::Campaign;
use crate::scoring::{aggregate, ArlAggregate, NodeScore, Score, ScoreError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: Score,
    pub q25: Score,
    pub median: Score,
    pub q75: Score,
    pub max: Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    /// Minimum signature difficulty over the node's reachable observables;
    /// absent when none of them carry a signature entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<f64>,
    pub arl_score: Score,
    pub arl_confidence: f64,
    pub quantiles: Quantiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub bucket_key: String,
    pub n_runs: usize,
    pub per_node: BTreeMap<NodeId, NodeReport>,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("bucket \"{0}\" has zero runs")]
    EmptyBucket(String),
    #[error("bucket \"{bucket}\" lists unknown realization {id}")]
    UnknownRealization { bucket: String, id: String },
    #[error("no scores found for realization {0}")]
    MissingScores(String),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("node filter matches nothing")]
    EmptyNodeFilter,
    #[error("no reports to render")]
    NoReports,
}

/// Linear-interpolation quantile over non-NaN scores.
fn quantiles(scores: &[Score]) -> Quantiles {
    let mut values: Vec<f64> = scores.iter().filter_map(Score::get).collect();
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    if values.is_empty() {
        return Quantiles {
            min: Score::nan(),
            q25: Score::nan(),
            median: Score::nan(),
            q75: Score::nan(),
            max: Score::nan(),
        };
    }
    let at = |p: f64| -> Score {
        let rank = p * (values.len() - 1) as f64;
        let lo = rank.floor() as usize;
        let hi = rank.ceil() as usize;
        let frac = rank - lo as f64;
        Score::value(values[lo] + (values[hi] - values[lo]) * frac)
    };
    Quantiles {
        min: at(0.0),
        q25: at(0.25),
        median: at(0.5),
        q75: at(0.75),
        max: at(1.0),
    }
}

/// Build one report per bucket from per-run score maps.
///
/// `top` keeps only the `k` largest buckets (by run count, then key) when
/// set; every selected bucket must have at least one scored run.
pub fn build_report(
    graph: &DecompositionGraph,
    campaign: &Campaign,
    scores_by_run: &BTreeMap<String, BTreeMap<NodeId, NodeScore>>,
    top: Option<usize>,
) -> Result<Vec<BucketReport>, ReportError> {
    let by_id: BTreeMap<&String, &crate::orchestrator::Realization> =
        campaign.realizations.iter().map(|r| (&r.id, r)).collect();

    let mut keys: Vec<&String> = campaign.buckets.keys().collect();
    if let Some(k) = top {
        keys.sort_by(|a, b| {
            let na = campaign.buckets[*a].len();
            let nb = campaign.buckets[*b].len();
            nb.cmp(&na).then_with(|| a.cmp(b))
        });
        keys.truncate(k);
        keys.sort();
    }

    let mut reports = Vec::with_capacity(keys.len());
    for key in keys {
        let ids = &campaign.buckets[key];
        if ids.is_empty() {
            return Err(ReportError::EmptyBucket(key.clone()));
        }
        let mut run_maps: Vec<BTreeMap<NodeId, NodeScore>> = Vec::with_capacity(ids.len());
        for id in ids {
            let map = scores_by_run
                .get(id)
                .ok_or_else(|| ReportError::MissingScores(id.clone()))?;
            run_maps.push(map.clone());
        }
        let aggregates: BTreeMap<NodeId, ArlAggregate> = aggregate(&run_maps, key)?;

        let signature = &by_id
            .get(&ids[0])
            .ok_or_else(|| ReportError::UnknownRealization {
                bucket: key.clone(),
                id: ids[0].clone(),
            })?
            .difficulty_signature;

        let mut per_node = BTreeMap::new();
        for (node, agg) in &aggregates {
            let difficulty = reachable_leaves(graph, node)
                .ok()
                .map(|leaves| {
                    leaves
                        .iter()
                        .filter_map(|leaf| signature.get(leaf).copied())
                        .fold(f64::INFINITY, f64::min)
                })
                .filter(|d| d.is_finite());
            per_node.insert(
                node.clone(),
                NodeReport {
                    difficulty,
                    arl_score: agg.arl_score,
                    arl_confidence: agg.arl_confidence,
                    quantiles: quantiles(&agg.score_distribution),
                },
            );
        }
        reports.push(BucketReport {
            bucket_key: key.clone(),
            n_runs: ids.len(),
            per_node,
        });
    }
    Ok(reports)
}

// Panel geometry, pixels.
const PANEL_W: f64 = 60.0;
const PLOT_H: f64 = 160.0;
const MARGIN_L: f64 = 46.0;
const MARGIN_R: f64 = 40.0;
const MARGIN_TOP: f64 = 28.0;
const MARGIN_BOT: f64 = 34.0;
const SCORE_AXIS_MAX: f64 = 104.0;

/// Render one panel per node: difficulty dot, score box with whiskers,
/// confidence bar, and N per bucket. Pure text output.
pub fn render_svg(
    reports: &[BucketReport],
    node_filter: Option<&[NodeId]>,
) -> Result<String, ReportError> {
    if reports.is_empty() {
        return Err(ReportError::NoReports);
    }
    let mut nodes: Vec<&NodeId> = reports[0].per_node.keys().collect();
    if let Some(filter) = node_filter {
        nodes.retain(|n| filter.contains(n));
        if nodes.is_empty() {
            return Err(ReportError::EmptyNodeFilter);
        }
    }

    let n_buckets = reports.len();
    let panel_plot_w = PANEL_W * n_buckets as f64;
    let panel_total_w = MARGIN_L + panel_plot_w + MARGIN_R;
    let panel_total_h = MARGIN_TOP + PLOT_H + MARGIN_BOT;
    let width = panel_total_w;
    let height = panel_total_h * nodes.len() as f64 + 16.0;

    let score_y = |base: f64, v: f64| base + PLOT_H - PLOT_H * (v / SCORE_AXIS_MAX).clamp(0.0, 1.0);
    let conf_h = |c: f64| PLOT_H * c.clamp(0.0, 1.0);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"monospace\" font-size=\"10\">"
    );
    let _ = writeln!(svg, "<rect width=\"{width:.0}\" height=\"{height:.0}\" fill=\"white\"/>");

    for (panel, node) in nodes.iter().enumerate() {
        let top = MARGIN_TOP + panel_total_h * panel as f64;
        let base = top; // plot area origin y
        let left = MARGIN_L;
        let _ = writeln!(
            svg,
            "<text x=\"{left:.1}\" y=\"{:.1}\" font-size=\"12\">{node}</text>",
            top - 10.0
        );
        // Axes.
        let _ = writeln!(
            svg,
            "<line x1=\"{left:.1}\" y1=\"{base:.1}\" x2=\"{left:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
            base + PLOT_H
        );
        let right_x = left + panel_plot_w;
        let _ = writeln!(
            svg,
            "<line x1=\"{right_x:.1}\" y1=\"{base:.1}\" x2=\"{right_x:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
            base + PLOT_H
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{left:.1}\" y1=\"{:.1}\" x2=\"{right_x:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
            base + PLOT_H,
            base + PLOT_H
        );
        for (frac, label) in [(0.0f64, "0"), (0.5, "50"), (1.0, "100")] {
            let y = score_y(base, frac * 100.0);
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{label}</text>",
                left - 4.0,
                y + 3.0
            );
        }
        for (frac, label) in [(0.0f64, "0.0"), (0.5, "0.5"), (1.0, "1.0")] {
            let y = base + PLOT_H - PLOT_H * frac;
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{:.1}\">{label}</text>",
                right_x + 4.0,
                y + 3.0
            );
        }

        for (i, report) in reports.iter().enumerate() {
            let Some(nr) = report.per_node.get(*node) else { continue };
            let cx = left + PANEL_W * (i as f64 + 0.5);

            // Confidence bar (right axis), behind the box.
            let bh = conf_h(nr.arl_confidence);
            let _ = writeln!(
                svg,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"16\" height=\"{bh:.1}\" fill=\"#c8c8c8\"/>",
                cx + 4.0,
                base + PLOT_H - bh
            );

            // Score box and whiskers (left axis).
            if let (Some(min), Some(q25), Some(med), Some(q75), Some(max)) = (
                nr.quantiles.min.get(),
                nr.quantiles.q25.get(),
                nr.quantiles.median.get(),
                nr.quantiles.q75.get(),
                nr.quantiles.max.get(),
            ) {
                let bx = cx - 18.0;
                let _ = writeln!(
                    svg,
                    "<line x1=\"{bx:.1}\" y1=\"{:.1}\" x2=\"{bx:.1}\" y2=\"{:.1}\" stroke=\"#3264c8\"/>",
                    score_y(base, min),
                    score_y(base, max)
                );
                let (ty, by_) = (score_y(base, q75), score_y(base, q25));
                let _ = writeln!(
                    svg,
                    "<rect x=\"{:.1}\" y=\"{ty:.1}\" width=\"12\" height=\"{:.1}\" \
                     fill=\"#a0b8e8\" stroke=\"#3264c8\"/>",
                    bx - 6.0,
                    (by_ - ty).max(0.5)
                );
                let my = score_y(base, med);
                let _ = writeln!(
                    svg,
                    "<line x1=\"{:.1}\" y1=\"{my:.1}\" x2=\"{:.1}\" y2=\"{my:.1}\" stroke=\"#1e3c8c\"/>",
                    bx - 6.0,
                    bx + 6.0
                );
            }

            // Difficulty dot.
            if let Some(d) = nr.difficulty {
                let _ = writeln!(
                    svg,
                    "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3.5\" fill=\"#d03232\"/>",
                    cx - 18.0,
                    score_y(base, d)
                );
            }

            // Run count and bucket index.
            let _ = writeln!(
                svg,
                "<text x=\"{cx:.1}\" y=\"{:.1}\" text-anchor=\"middle\">N={}</text>",
                base + PLOT_H + 12.0,
                report.n_runs
            );
            let _ = writeln!(
                svg,
                "<text x=\"{cx:.1}\" y=\"{:.1}\" text-anchor=\"middle\">B{}</text>",
                base + PLOT_H + 24.0,
                i + 1
            );
        }
    }

    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}
