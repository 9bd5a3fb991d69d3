//! Run logs: the test-port contract between simulation and scoring.
//!
//! A log is line-delimited JSON: one header record carrying the scene and
//! config snapshot (so evaluators can audit the run from the log alone), one
//! record per tick, and one footer with the outcome. Timestamps are seconds
//! from mission start; positions are meters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{ActorRole, Scene};

use super::config::SimConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Target,
    Bystander,
    Clutter,
    Unknown,
}

impl Label {
    pub fn from_role(role: ActorRole) -> Self {
        match role {
            ActorRole::Target => Label::Target,
            ActorRole::Bystander => Label::Bystander,
            ActorRole::Clutter => Label::Clutter,
            ActorRole::UavStart => Label::Unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub actor_id: String,
    pub true_role: ActorRole,
    pub reported_label: Label,
    pub confidence: f64,
    /// Compass bearing from the UAV to the actor, degrees.
    pub bearing_deg: f64,
    /// Ground distance from the UAV to the actor, meters.
    pub range_m: f64,
}

impl DetectionEvent {
    /// Viewpoint sector: the bearing from the actor back to the UAV,
    /// quantized into eight 45-degree bins. Derived from the logged bearing
    /// so auditors reproduce it exactly.
    pub fn viewpoint_bin(&self) -> u8 {
        (((self.bearing_deg + 180.0).rem_euclid(360.0)) / 45.0) as u8 % 8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    GotoSubregion,
    BeginSearch,
    MarkTarget,
    SuppressMark,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionEvent {
    pub kind: DecisionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UavStage {
    Transit,
    Search,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Timeout,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t_s: f64,
    pub uav_pos: [f64; 2],
    pub uav_stage: UavStage,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub detections: Vec<DetectionEvent>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub decisions: Vec<DecisionEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub realization_id: String,
    pub seed: u64,
    pub scene: Scene,
    pub config: SimConfig,
    pub ticks: Vec<TickRecord>,
    pub outcome: Outcome,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LogLine {
    Header {
        realization_id: String,
        seed: u64,
        scene: Scene,
        config: SimConfig,
    },
    Tick(TickRecord),
    Footer { outcome: Outcome, ticks: usize },
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("log line {line}: {source}")]
    BadLine {
        line: usize,
        source: serde_json::Error,
    },
    #[error("log is missing its header record")]
    MissingHeader,
    #[error("log is missing its footer record")]
    MissingFooter,
    #[error("record out of order at line {0}")]
    OutOfOrder(usize),
    #[error("footer counts {footer} ticks but {actual} are present")]
    TickCountMismatch { footer: usize, actual: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RunLog {
    /// Serialize as line-delimited records: header, ticks, footer.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        let header = LogLine::Header {
            realization_id: self.realization_id.clone(),
            seed: self.seed,
            scene: self.scene.clone(),
            config: self.config.clone(),
        };
        out.push_str(&serde_json::to_string(&header).expect("log serialization"));
        out.push('\n');
        for tick in &self.ticks {
            out.push_str(&serde_json::to_string(&LogLine::Tick(tick.clone())).expect("log serialization"));
            out.push('\n');
        }
        let footer = LogLine::Footer {
            outcome: self.outcome,
            ticks: self.ticks.len(),
        };
        out.push_str(&serde_json::to_string(&footer).expect("log serialization"));
        out.push('\n');
        out
    }

    pub fn from_lines(text: &str) -> Result<Self, LogError> {
        let mut header: Option<(String, u64, Scene, SimConfig)> = None;
        let mut ticks: Vec<TickRecord> = Vec::new();
        let mut footer: Option<(Outcome, usize)> = None;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: LogLine =
                serde_json::from_str(line).map_err(|source| LogError::BadLine { line: i + 1, source })?;
            match parsed {
                LogLine::Header {
                    realization_id,
                    seed,
                    scene,
                    config,
                } => {
                    if header.is_some() || !ticks.is_empty() {
                        return Err(LogError::OutOfOrder(i + 1));
                    }
                    header = Some((realization_id, seed, scene, config));
                }
                LogLine::Tick(t) => {
                    if header.is_none() || footer.is_some() {
                        return Err(LogError::OutOfOrder(i + 1));
                    }
                    ticks.push(t);
                }
                LogLine::Footer { outcome, ticks: n } => {
                    if header.is_none() || footer.is_some() {
                        return Err(LogError::OutOfOrder(i + 1));
                    }
                    footer = Some((outcome, n));
                }
            }
        }
        let (realization_id, seed, scene, config) = header.ok_or(LogError::MissingHeader)?;
        let (outcome, n) = footer.ok_or(LogError::MissingFooter)?;
        if n != ticks.len() {
            return Err(LogError::TickCountMismatch {
                footer: n,
                actual: ticks.len(),
            });
        }
        Ok(Self {
            realization_id,
            seed,
            scene,
            config,
            ticks,
            outcome,
        })
    }

    pub fn decisions(&self) -> impl Iterator<Item = &DecisionEvent> {
        self.ticks.iter().flat_map(|t| t.decisions.iter())
    }

    pub fn detections(&self) -> impl Iterator<Item = &DetectionEvent> {
        self.ticks.iter().flat_map(|t| t.detections.iter())
    }

    pub fn marks(&self) -> impl Iterator<Item = &DecisionEvent> {
        self.decisions().filter(|d| d.kind == DecisionKind::MarkTarget)
    }
}
