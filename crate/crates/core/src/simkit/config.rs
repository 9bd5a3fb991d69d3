//! Simulation configuration with documented calibration defaults.
//!
//! Every field has a serde default so manifests can override any subset.
//! Weather and altitude are normally bound per realization from the scenario
//! parameters via [`SimConfig::apply_params`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::scenario::ParamValue;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Weather {
    /// Rain severity, 0 (none) to 9.
    pub rain_level: f64,
    /// Fog severity, 0 (none) to 9.
    pub fog_level: f64,
    /// Hours from solar noon, 0 (noon) to 8.
    pub hours_till_solar_noon: f64,
}

impl Default for Weather {
    fn default() -> Self {
        Self {
            rain_level: 0.0,
            fog_level: 0.0,
            hours_till_solar_noon: 0.0,
        }
    }
}

/// The agent's engagement rule knobs. These describe the system under test,
/// not the scoring rubric: the audited safety radius lives in observable
/// metadata and stays fixed when these are scripted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Engagement {
    /// Minimum detection confidence for a frame to count toward marking.
    pub conf_floor: f64,
    /// Qualifying frames required back to back (k).
    pub consecutive_frames: u32,
    /// Distinct 45-degree viewpoint sectors required (m).
    pub min_viewpoints: u32,
    /// The agent withholds a mark when an actor it has labeled bystander sits
    /// within this many meters of the candidate target. Zero disables the
    /// rule (an agent with no bystander reasoning).
    pub bystander_safety_radius_m: f64,
}

impl Default for Engagement {
    fn default() -> Self {
        Self {
            conf_floor: 0.35,
            consecutive_frames: 3,
            min_viewpoints: 2,
            bystander_safety_radius_m: 50.0,
        }
    }
}

/// Parametric detection-model constants.
///
/// Detection probability is `p_base` scaled by one linear attenuation per
/// weather factor (1.0 at the easiest calibrated value down to `g_min` at the
/// hardest) and by the actor's concealment. Misclassification ramps linearly
/// from `p_mis_min` in clear conditions to `p_mis_max` at maximum weather
/// severity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionParams {
    pub p_base: f64,
    pub g_min: f64,
    pub p_mis_min: f64,
    pub p_mis_max: f64,
    /// Width of the uniform downward noise on reported confidence.
    pub conf_noise: f64,
    /// Ablation switch: report ground truth with confidence 1.0 instead of
    /// drawing from the parametric model.
    pub ground_truth: bool,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            p_base: 0.95,
            g_min: 0.2,
            p_mis_min: 0.02,
            p_mis_max: 0.25,
            conf_noise: 0.3,
            ground_truth: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Seconds per simulation step.
    pub tick_s: f64,
    /// Maximum mission length in seconds; exceeding it is a timeout outcome.
    pub duration_s: f64,
    pub uav_speed_mps: f64,
    pub uav_altitude_m: f64,
    pub sensor_fov_halfangle_deg: f64,
    pub weather: Weather,
    pub engagement: Engagement,
    pub detection: DetectionParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            tick_s: 1.0,
            duration_s: 600.0,
            uav_speed_mps: 20.0,
            uav_altitude_m: 500.0,
            sensor_fov_halfangle_deg: 15.0,
            weather: Weather::default(),
            engagement: Engagement::default(),
            detection: DetectionParams::default(),
        }
    }
}

impl SimConfig {
    /// Ground radius of the nadir sensor cone.
    pub fn footprint_radius_m(&self) -> f64 {
        self.uav_altitude_m * self.sensor_fov_halfangle_deg.to_radians().tan()
    }

    /// Full sweep width: `2 * altitude * tan(fov_halfangle)`.
    pub fn swath_m(&self) -> f64 {
        2.0 * self.footprint_radius_m()
    }

    /// Check the configuration invariants; returns the first problem found.
    pub fn validate(&self) -> Result<(), String> {
        if self.tick_s.is_nan() || self.tick_s <= 0.0 {
            return Err(format!("tick_s must be positive, got {}", self.tick_s));
        }
        if self.duration_s < self.tick_s {
            return Err(format!(
                "duration_s {} is shorter than one tick {}",
                self.duration_s, self.tick_s
            ));
        }
        if self.uav_speed_mps.is_nan() || self.uav_speed_mps <= 0.0 {
            return Err(format!("uav_speed_mps must be positive, got {}", self.uav_speed_mps));
        }
        if self.uav_altitude_m.is_nan() || self.uav_altitude_m <= 0.0 {
            return Err(format!("uav_altitude_m must be positive, got {}", self.uav_altitude_m));
        }
        if !(self.sensor_fov_halfangle_deg > 0.0 && self.sensor_fov_halfangle_deg < 90.0) {
            return Err(format!(
                "sensor_fov_halfangle_deg must be in (0, 90), got {}",
                self.sensor_fov_halfangle_deg
            ));
        }
        if !(0.0..=1.0).contains(&self.engagement.conf_floor) {
            return Err(format!(
                "conf_floor must be in [0,1], got {}",
                self.engagement.conf_floor
            ));
        }
        if self.engagement.consecutive_frames < 1 {
            return Err("consecutive_frames must be at least 1".to_string());
        }
        if self.engagement.min_viewpoints < 1 {
            return Err("min_viewpoints must be at least 1".to_string());
        }
        Ok(())
    }

    /// Bind weather and altitude from realization parameters when present.
    /// Recognized keys: `rain_level`, `fog_level`, `hours_till_solar_noon`,
    /// `uav_altitude` (meters).
    pub fn apply_params(&mut self, params: &BTreeMap<String, ParamValue>) {
        let num = |key: &str| params.get(key).and_then(ParamValue::as_num);
        if let Some(v) = num("rain_level") {
            self.weather.rain_level = v;
        }
        if let Some(v) = num("fog_level") {
            self.weather.fog_level = v;
        }
        if let Some(v) = num("hours_till_solar_noon") {
            self.weather.hours_till_solar_noon = v;
        }
        if let Some(v) = num("uav_altitude") {
            self.uav_altitude_m = v;
        }
    }
}
