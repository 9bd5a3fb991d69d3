//! `rebar` — batch evaluation campaigns over the scenario pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rebar_cli::manifest::Manifest;
use rebar_cli::stages;
use rebar_cli::{OutLayout, StageError};
use rebar_core::graph::NodeId;
use rebar_core::orchestrator::Strategy;

#[derive(Parser)]
#[command(name = "rebar", version, about = "Expand, simulate, score, and report evaluation campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a graph-config document against every structural invariant
    Validate {
        /// Graph-config file (or take it from --manifest)
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Parse a scenario text (plus optional sidecar) into base.json
    Parse {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        sidecar: Option<PathBuf>,
        /// Output file (default: <out>/base.json from the manifest)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Expand base.json into campaign.json and placed SimSpec files
    Expand {
        #[arg(long)]
        base: Option<PathBuf>,
        /// full | grid:N | random:K | random:K:N
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Campaign output directory
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        max_attempts: Option<u32>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Run the simulator for every realization (resumable)
    Simulate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Evaluate observables and roll scores up the graph
    Score {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Synthetic outcomes fixture instead of run logs
        #[arg(long)]
        outcomes: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Group aggregates into equi-ethical buckets and render report.svg
    Report {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated node ids to render, e.g. KA-03,KA-18
        #[arg(long)]
        nodes: Option<String>,
        /// all | top:K
        #[arg(long)]
        buckets: Option<String>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Full pipeline from a manifest: validate through report
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

/// Print a line, ignoring a closed stdout (e.g. piping into `head`).
fn say(msg: String) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{msg}");
}

fn load_manifest(path: Option<&PathBuf>) -> Result<Option<Manifest>, StageError> {
    path.map(|p| Manifest::load(p)).transpose()
}

fn need<T>(value: Option<T>, flag: &str) -> Result<T, StageError> {
    value.ok_or_else(|| StageError::Validation(format!("missing --{flag} (or provide --manifest)")))
}

fn parse_bucket_top(buckets: Option<&str>) -> Result<Option<usize>, StageError> {
    match buckets {
        None | Some("all") => Ok(None),
        Some(s) => match s.strip_prefix("top:").and_then(|k| k.parse::<usize>().ok()) {
            Some(k) if k > 0 => Ok(Some(k)),
            _ => Err(StageError::Validation(format!(
                "bad buckets selector \"{s}\"; expected all or top:K"
            ))),
        },
    }
}

fn dispatch(cli: Cli) -> Result<(), StageError> {
    match cli.command {
        Command::Validate { graph, manifest } => {
            let m = load_manifest(manifest.as_ref())?;
            let graph = need(graph.or(m.map(|m| m.graph)), "graph")?;
            let report = stages::cmd_validate(&graph)?;
            if report.is_valid() {
                say(format!("{}: valid", graph.display()));
                Ok(())
            } else {
                say(format!("{}:\n{report}", graph.display()));
                Err(StageError::Validation(format!(
                    "{} violated invariants",
                    report.issues.len()
                )))
            }
        }
        Command::Parse {
            scenario,
            sidecar,
            out,
            manifest,
        } => {
            let m = load_manifest(manifest.as_ref())?;
            let scenario = need(scenario.or(m.as_ref().map(|m| m.scenario.clone())), "scenario")?;
            let sidecar = sidecar.or(m.as_ref().and_then(|m| m.sidecar.clone()));
            let out_file = need(
                out.or(m.as_ref().map(|m| OutLayout::new(&m.out).base_file())),
                "out",
            )?;
            let base = stages::cmd_parse(&scenario, sidecar.as_deref(), &out_file)?;
            say(format!(
                "parsed {}: {} slots, {} fixed -> {}",
                base.id,
                base.slots.len(),
                base.fixed.len(),
                out_file.display()
            ));
            Ok(())
        }
        Command::Expand {
            base,
            strategy,
            seed,
            graph,
            out,
            max_attempts,
            manifest,
        } => {
            let m = load_manifest(manifest.as_ref())?;
            let out_dir = need(out.or(m.as_ref().map(|m| m.out.clone())), "out")?;
            let layout = OutLayout::new(&out_dir);
            let base = base.unwrap_or_else(|| layout.base_file());
            let strategy: Strategy = need(
                strategy.or(m.as_ref().map(|m| m.strategy.clone())),
                "strategy",
            )?
            .parse()?;
            let seed = need(seed.or(m.as_ref().map(|m| m.campaign_seed)), "seed")?;
            let graph = need(graph.or(m.as_ref().map(|m| m.graph.clone())), "graph")?;
            let max_attempts = max_attempts
                .or(m.as_ref().map(|m| m.max_attempts))
                .unwrap_or(10_000);
            let campaign = stages::cmd_expand(&base, strategy, seed, &graph, &layout, max_attempts)?;
            say(format!(
                "expanded {} realizations into {} buckets -> {}",
                campaign.realizations.len(),
                campaign.buckets.len(),
                layout.root.display()
            ));
            Ok(())
        }
        Command::Simulate { manifest, out, jobs } => {
            let mut m = Manifest::load(&manifest)?;
            if let Some(out) = out {
                m.out = out;
            }
            let jobs = jobs.unwrap_or(m.jobs);
            let layout = OutLayout::new(&m.out);
            let (ran, skipped) = stages::cmd_simulate(&m.sim, &layout, jobs)?;
            say(format!(
                "simulated {ran} runs ({skipped} up to date) -> {}",
                layout.logs_dir().display()
            ));
            Ok(())
        }
        Command::Score {
            graph,
            out,
            outcomes,
            jobs,
            manifest,
        } => {
            let m = load_manifest(manifest.as_ref())?;
            let graph = need(graph.or(m.as_ref().map(|m| m.graph.clone())), "graph")?;
            let out_dir = need(out.or(m.as_ref().map(|m| m.out.clone())), "out")?;
            let layout = OutLayout::new(&out_dir);
            let agg = match outcomes {
                Some(fixture) => stages::cmd_score_outcomes(&graph, &fixture, &layout)?,
                None => {
                    let jobs = jobs.or(m.as_ref().map(|m| m.jobs)).unwrap_or(1);
                    stages::cmd_score(&graph, &layout, jobs)?
                }
            };
            say(format!("scored {} runs -> {}", agg.runs, layout.scores_dir().display()));
            for (node, a) in &agg.nodes {
                say(format!("  {node}: arl {} @ confidence {:.4}", a.arl_score, a.arl_confidence));
            }
            Ok(())
        }
        Command::Report {
            graph,
            out,
            nodes,
            buckets,
            manifest,
        } => {
            let m = load_manifest(manifest.as_ref())?;
            let graph = need(graph.or(m.as_ref().map(|m| m.graph.clone())), "graph")?;
            let out_dir = need(out.or(m.as_ref().map(|m| m.out.clone())), "out")?;
            let layout = OutLayout::new(&out_dir);
            let node_filter: Option<Vec<NodeId>> = nodes
                .map(|s| s.split(',').map(|n| NodeId::new(n.trim())).collect())
                .or(m.as_ref().and_then(|m| m.node_filter()));
            let bucket_top = match buckets {
                Some(b) => parse_bucket_top(Some(&b))?,
                None => m.as_ref().map(|m| m.bucket_top()).transpose()?.flatten(),
            };
            let reports = stages::cmd_report(&graph, &layout, node_filter.as_deref(), bucket_top)?;
            say(format!(
                "reported {} buckets -> {} and {}",
                reports.len(),
                layout.report_file().display(),
                layout.svg_file().display()
            ));
            Ok(())
        }
        Command::Run { manifest, out, jobs } => {
            let mut m = Manifest::load(&manifest)?;
            if let Some(out) = out {
                m.out = out;
            }
            if let Some(jobs) = jobs {
                m.jobs = jobs;
            }
            let summary = stages::cmd_run(&m)?;
            say(format!(
                "campaign complete: {} realizations, {} buckets, {} simulated ({} up to date), {} bucket reports -> {}",
                summary.realizations,
                summary.buckets,
                summary.simulated,
                summary.skipped,
                summary.reports,
                m.out.display()
            ));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
