//! Deterministic discrete-time 2-D overhead simulation of the search mission.
//!
//! The surrogate agent follows the three-stage mission structure: fly to the
//! cued subregion, sweep it with a serpentine lawnmower pattern sized to the
//! sensor swath, and mark targets once the engagement conditions hold —
//! qualifying detections on `k` consecutive frames from at least `m` distinct
//! viewpoint sectors, with no bystander-labeled actor inside the agent's
//! safety radius (otherwise the mark is suppressed and logged as such). If
//! the sweep ends without completing the mission the agent re-flies it until
//! the mission clock runs out.
//!
//! A run is a pure function of `(scene, config, seed)`: all randomness comes
//! from counter-based streams keyed by (actor ordinal, tick), so identical
//! inputs reproduce byte-identical logs and adding actors never perturbs the
//! draws of existing ones.

pub mod config;
pub mod detect;
pub mod log;
pub mod path;

pub use config::{DetectionParams, Engagement, SimConfig, Weather};
pub use detect::{detection_probability, misclassification_probability, Sensor, Sighting};
pub use log::{
    DecisionEvent, DecisionKind, DetectionEvent, Label, LogError, Outcome, RunLog, TickRecord,
    UavStage,
};
pub use path::{coverage_fraction, lawnmower_waypoints};

use std::collections::{BTreeMap, BTreeSet};

use crate::rng::{substream, SeedStream};
use crate::scene::{bearing_deg, distance, ActorRole, Scene};

/// Stream label separating simulation draws from placement draws.
const SIM_STREAM_LABEL: u64 = 0x51A1;

#[derive(Debug, Default, Clone)]
struct Track {
    /// Consecutive frames with a qualifying (target-labeled, confident)
    /// detection; broken by any frame without one.
    streak: u32,
    /// Viewpoint sectors accumulated over every qualifying detection.
    bins: BTreeSet<u8>,
    /// Most recent reported label, any confidence.
    last_label: Option<Label>,
    marked: bool,
    suppressed: bool,
}

/// Execute one mission and return its log.
pub fn run(scene: &Scene, config: &SimConfig, seed: u64) -> RunLog {
    let sim_seed = substream(seed, SIM_STREAM_LABEL);
    let sensor = Sensor {
        params: &config.detection,
        weather: &config.weather,
        altitude_m: config.uav_altitude_m,
    };
    let footprint_r = config.footprint_radius_m();
    let search_rect = scene.search_rect();
    let sweep = lawnmower_waypoints(search_rect, config.swath_m().max(1.0));

    let start = scene
        .actors
        .iter()
        .find(|a| a.role == ActorRole::UavStart)
        .map(|a| a.position)
        .unwrap_or_else(|| [0.0, 0.0]);
    let mut uav_pos = start;
    let mut wp_index = 0usize;
    let mut stage = UavStage::Transit;

    let target_ids: Vec<&str> = scene
        .actors
        .iter()
        .filter(|a| a.role == ActorRole::Target)
        .map(|a| a.id.as_str())
        .collect();

    let mut tracks: BTreeMap<String, Track> = BTreeMap::new();
    let mut ticks: Vec<TickRecord> = Vec::new();
    let mut outcome = Outcome::Timeout;

    let region_name = scene
        .cued_region
        .clone()
        .unwrap_or_else(|| "extent".to_string());

    let mut tick: u64 = 0;
    loop {
        let t_s = tick as f64 * config.tick_s;
        if t_s > config.duration_s {
            break;
        }

        let mut decisions: Vec<DecisionEvent> = Vec::new();
        if tick == 0 {
            decisions.push(DecisionEvent {
                kind: DecisionKind::GotoSubregion,
                subject: None,
                reason: region_name.clone(),
            });
        } else {
            // Constant-speed waypoint following with instantaneous turns;
            // leftover travel in a tick carries into the next leg.
            let mut remaining = config.uav_speed_mps * config.tick_s;
            let mut hops = 0usize;
            while remaining > 1e-9 && hops < sweep.len() * 2 + 2 {
                let wp = sweep[wp_index.min(sweep.len() - 1)];
                let d = distance(uav_pos, wp);
                if d <= remaining {
                    uav_pos = wp;
                    remaining -= d;
                    hops += 1;
                    if stage == UavStage::Transit {
                        stage = UavStage::Search;
                        decisions.push(DecisionEvent {
                            kind: DecisionKind::BeginSearch,
                            subject: None,
                            reason: region_name.clone(),
                        });
                    }
                    if wp_index + 1 < sweep.len() {
                        wp_index += 1;
                    } else {
                        wp_index = 0; // re-fly the sweep until timeout
                    }
                } else {
                    let dir = [(wp[0] - uav_pos[0]) / d, (wp[1] - uav_pos[1]) / d];
                    uav_pos = [uav_pos[0] + dir[0] * remaining, uav_pos[1] + dir[1] * remaining];
                    remaining = 0.0;
                }
            }
        }

        // Sense every ground actor inside the footprint.
        let mut detections: Vec<DetectionEvent> = Vec::new();
        let mut qualifying_now: BTreeSet<String> = BTreeSet::new();
        for (ordinal, actor) in scene.actors.iter().enumerate() {
            if actor.role == ActorRole::UavStart {
                continue;
            }
            let range = distance(uav_pos, actor.position);
            if range > footprint_r {
                continue;
            }
            let sighting = Sighting {
                bearing_deg: bearing_deg(uav_pos, actor.position),
                range_m: range,
            };
            let mut stream = SeedStream::for_actor_tick(sim_seed, ordinal as u64, tick);
            if let Some(event) = sensor.detect(
                &actor.id,
                actor.role,
                actor.concealment,
                sighting,
                &mut stream,
            ) {
                let track = tracks.entry(actor.id.clone()).or_default();
                track.last_label = Some(event.reported_label);
                if event.reported_label == Label::Target
                    && event.confidence >= config.engagement.conf_floor
                {
                    track.streak += 1;
                    track.bins.insert(event.viewpoint_bin());
                    qualifying_now.insert(actor.id.clone());
                }
                detections.push(event);
            }
        }
        for (id, track) in tracks.iter_mut() {
            if !qualifying_now.contains(id) {
                track.streak = 0;
            }
        }

        // Engagement: evaluate candidates in scene order.
        let positions: BTreeMap<&str, [f64; 2]> = scene
            .actors
            .iter()
            .map(|a| (a.id.as_str(), a.position))
            .collect();
        for actor in &scene.actors {
            let Some(track) = tracks.get(&actor.id) else { continue };
            if track.marked
                || track.streak < config.engagement.consecutive_frames
                || (track.bins.len() as u32) < config.engagement.min_viewpoints
            {
                continue;
            }
            let radius = config.engagement.bystander_safety_radius_m;
            let bystander_near = radius > 0.0
                && tracks.iter().any(|(id, t)| {
                    id != &actor.id
                        && t.last_label == Some(Label::Bystander)
                        && positions
                            .get(id.as_str())
                            .is_some_and(|p| distance(*p, actor.position) <= radius)
                });
            let track = tracks.get_mut(&actor.id).expect("track exists");
            if bystander_near {
                if !track.suppressed {
                    track.suppressed = true;
                    decisions.push(DecisionEvent {
                        kind: DecisionKind::SuppressMark,
                        subject: Some(actor.id.clone()),
                        reason: "bystander_proximity".to_string(),
                    });
                }
            } else {
                track.marked = true;
                decisions.push(DecisionEvent {
                    kind: DecisionKind::MarkTarget,
                    subject: Some(actor.id.clone()),
                    reason: format!(
                        "streak {} viewpoints {}",
                        track.streak,
                        track.bins.len()
                    ),
                });
            }
        }

        let mission_done = !target_ids.is_empty()
            && target_ids
                .iter()
                .all(|id| tracks.get(*id).is_some_and(|t| t.marked));
        if mission_done {
            decisions.push(DecisionEvent {
                kind: DecisionKind::Complete,
                subject: None,
                reason: "all_targets_marked".to_string(),
            });
        }

        ticks.push(TickRecord {
            t_s,
            uav_pos,
            uav_stage: stage,
            detections,
            decisions,
        });

        if mission_done {
            outcome = Outcome::Completed;
            break;
        }
        tick += 1;
    }

    RunLog {
        realization_id: String::new(),
        seed,
        scene: scene.clone(),
        config: config.clone(),
        ticks,
        outcome,
    }
}
