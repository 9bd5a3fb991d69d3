//! Library surface of the `rebar` campaign driver.
//!
//! Each pipeline stage is a plain function over an output directory with a
//! fixed layout, so the stage subcommands compose into exactly what `run`
//! produces:
//!
//! ```text
//! <out>/base.json          parsed scenario
//! <out>/campaign.json      realizations, signatures, buckets
//! <out>/specs/rNNNNN.json  one SimSpec per realization, scene included
//! <out>/logs/rNNNNN.log    one line-delimited run log per realization
//! <out>/scores/rNNNNN.json per-run node scores
//! <out>/aggregate.json     whole-campaign per-node aggregate
//! <out>/report.json        per-bucket reports
//! <out>/report.svg         rendered summary
//! ```

pub mod manifest;
pub mod stages;

use std::fmt;
use std::path::{Path, PathBuf};

use rebar_core::graph::GraphError;
use rebar_core::orchestrator::{ExpandError, StrategyParseError};
use rebar_core::report::ReportError;
use rebar_core::scenario::ScenarioError;
use rebar_core::scene::SceneError;
use rebar_core::scoring::ScoreError;
use rebar_core::simkit::LogError;

/// Stage failure with a defined process exit code:
/// 2 validation, 3 unsatisfiable placement, 4 I/O, 1 anything else.
#[derive(Debug)]
pub enum StageError {
    Validation(String),
    Placement(String),
    Io(String),
    Other(String),
}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        match self {
            StageError::Validation(_) => 2,
            StageError::Placement(_) => 3,
            StageError::Io(_) => 4,
            StageError::Other(_) => 1,
        }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        StageError::Io(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StageError::Validation(m) => write!(f, "validation failure: {m}"),
            StageError::Placement(m) => write!(f, "placement failure: {m}"),
            StageError::Io(m) => write!(f, "i/o failure: {m}"),
            StageError::Other(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for StageError {}

impl From<GraphError> for StageError {
    fn from(e: GraphError) -> Self {
        StageError::Validation(e.to_string())
    }
}

impl From<ScenarioError> for StageError {
    fn from(e: ScenarioError) -> Self {
        StageError::Validation(e.to_string())
    }
}

impl From<ExpandError> for StageError {
    fn from(e: ExpandError) -> Self {
        StageError::Validation(e.to_string())
    }
}

impl From<StrategyParseError> for StageError {
    fn from(e: StrategyParseError) -> Self {
        StageError::Validation(e.to_string())
    }
}

impl From<SceneError> for StageError {
    fn from(e: SceneError) -> Self {
        match e {
            SceneError::Unsatisfiable { .. } | SceneError::PlacementInvalid(_) => {
                StageError::Placement(e.to_string())
            }
            other => StageError::Validation(other.to_string()),
        }
    }
}

impl From<LogError> for StageError {
    fn from(e: LogError) -> Self {
        StageError::Validation(e.to_string())
    }
}

impl From<ScoreError> for StageError {
    fn from(e: ScoreError) -> Self {
        StageError::Validation(e.to_string())
    }
}

impl From<ReportError> for StageError {
    fn from(e: ReportError) -> Self {
        StageError::Validation(e.to_string())
    }
}

/// Artifact layout under one campaign output directory.
#[derive(Debug, Clone)]
pub struct OutLayout {
    pub root: PathBuf,
}

impl OutLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn base_file(&self) -> PathBuf {
        self.root.join("base.json")
    }

    pub fn campaign_file(&self) -> PathBuf {
        self.root.join("campaign.json")
    }

    pub fn specs_dir(&self) -> PathBuf {
        self.root.join("specs")
    }

    pub fn spec_file(&self, id: &str) -> PathBuf {
        self.specs_dir().join(format!("{id}.json"))
    }

    pub fn logs_dir(&self) -> PathBuf {
        self.root.join("logs")
    }

    pub fn log_file(&self, id: &str) -> PathBuf {
        self.logs_dir().join(format!("{id}.log"))
    }

    pub fn scores_dir(&self) -> PathBuf {
        self.root.join("scores")
    }

    pub fn score_file(&self, id: &str) -> PathBuf {
        self.scores_dir().join(format!("{id}.json"))
    }

    pub fn aggregate_file(&self) -> PathBuf {
        self.root.join("aggregate.json")
    }

    pub fn report_file(&self) -> PathBuf {
        self.root.join("report.json")
    }

    pub fn svg_file(&self) -> PathBuf {
        self.root.join("report.svg")
    }
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, StageError> {
    std::fs::read(path).map_err(|e| StageError::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String, StageError> {
    std::fs::read_to_string(path).map_err(|e| StageError::io(path, e))
}

/// Write a document, creating parent directories.
pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), StageError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| StageError::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| StageError::io(path, e))
}

/// JSON artifacts go out pretty-printed with a trailing newline so they stay
/// byte-stable and diffable.
pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), StageError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| StageError::Other(format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, StageError> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes)
        .map_err(|e| StageError::Validation(format!("{}: {e}", path.display())))
}

/// Run `f(0..n)` on a bounded worker pool. New work stops after the first
/// failure and the failure with the smallest index is the one reported, so
/// error behavior does not depend on scheduling.
pub(crate) fn parallel_indexed<F>(n: usize, jobs: usize, f: F) -> Result<(), StageError>
where
    F: Fn(usize) -> Result<(), StageError> + Sync,
{
    use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
    use std::sync::Mutex;

    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let failures: Mutex<Vec<(usize, StageError)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, n.max(1)) {
            scope.spawn(|| loop {
                if failed.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                if let Err(e) = f(i) {
                    failed.store(true, Ordering::Relaxed);
                    failures.lock().expect("worker poisoned").push((i, e));
                }
            });
        }
    });
    let mut failures = failures.into_inner().expect("worker poisoned");
    failures.sort_by_key(|(i, _)| *i);
    match failures.into_iter().next() {
        Some((_, e)) => Err(e),
        None => Ok(()),
    }
}
