//! Campaign manifest: one config file driving the whole pipeline.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use rebar_core::graph::NodeId;
use rebar_core::orchestrator::Strategy;
use rebar_core::simkit::SimConfig;

use crate::{read_json, StageError};

fn default_jobs() -> usize {
    1
}

fn default_max_attempts() -> u32 {
    10_000
}

#[derive(Debug, Clone, Deserialize)]
pub struct Manifest {
    pub graph: PathBuf,
    pub scenario: PathBuf,
    #[serde(default)]
    pub sidecar: Option<PathBuf>,
    /// `full`, `grid:N`, `random:K`, or `random:K:N`.
    pub strategy: String,
    pub campaign_seed: u64,
    /// Sim overrides; omitted fields keep their defaults. Weather and
    /// altitude are still overridden per realization by scenario parameters.
    #[serde(default)]
    pub sim: SimConfig,
    pub out: PathBuf,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    /// Report SVG node filter, e.g. ["KA-03", "KA-18"].
    #[serde(default)]
    pub nodes: Option<Vec<String>>,
    /// Bucket selection: "all" (default) or "top:K".
    #[serde(default)]
    pub buckets: Option<String>,
}

impl Manifest {
    /// Load a manifest, resolving its relative paths against its directory
    /// and checking that the referenced input files exist.
    pub fn load(path: &Path) -> Result<Self, StageError> {
        let mut m: Manifest = read_json(path)?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        m.graph = resolve(dir, &m.graph);
        m.scenario = resolve(dir, &m.scenario);
        m.sidecar = m.sidecar.as_ref().map(|p| resolve(dir, p));
        m.out = resolve(dir, &m.out);
        if m.jobs == 0 {
            return Err(StageError::Validation("jobs must be at least 1".into()));
        }
        if m.max_attempts == 0 {
            return Err(StageError::Validation("max_attempts must be at least 1".into()));
        }
        m.sim
            .validate()
            .map_err(|e| StageError::Validation(format!("{}: sim config: {e}", path.display())))?;
        for input in [Some(&m.graph), Some(&m.scenario), m.sidecar.as_ref()]
            .into_iter()
            .flatten()
        {
            if !input.exists() {
                return Err(StageError::Io(format!("{}: not found", input.display())));
            }
        }
        Ok(m)
    }

    pub fn strategy(&self) -> Result<Strategy, StageError> {
        Ok(self.strategy.parse()?)
    }

    /// None keeps every bucket; Some(k) keeps the k largest.
    pub fn bucket_top(&self) -> Result<Option<usize>, StageError> {
        match self.buckets.as_deref() {
            None | Some("all") => Ok(None),
            Some(s) => match s.strip_prefix("top:").and_then(|k| k.parse::<usize>().ok()) {
                Some(k) if k > 0 => Ok(Some(k)),
                _ => Err(StageError::Validation(format!(
                    "bad buckets selector \"{s}\"; expected all or top:K"
                ))),
            },
        }
    }

    pub fn node_filter(&self) -> Option<Vec<NodeId>> {
        self.nodes
            .as_ref()
            .map(|ns| ns.iter().map(|s| NodeId::new(s.clone())).collect())
    }
}

fn resolve(dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}
