//! Parametric detection model.
//!
//! A stand-in for a pixel pipeline: per (actor, tick) the sensor draws a
//! Bernoulli detection with closed-form probability
//!
//! ```text
//! p = p_base * g_rain(rain) * g_fog(fog) * g_sun(hours) * g_alt(altitude) * concealment
//! ```
//!
//! where each `g` attenuates linearly from 1.0 at the easiest calibrated
//! value to `g_min` at the hardest (rain/fog 0..9, hours 0..8, altitude
//! 500..6000 m). On success, reported confidence is the product of the
//! attenuations scaled down by uniform noise, and target/bystander labels
//! flip with probability `p_mis` ramping linearly with mean weather severity.

use serde::{Deserialize, Serialize};

use crate::rng::SeedStream;
use crate::scene::ActorRole;

use super::config::{DetectionParams, Weather};
use super::log::{DetectionEvent, Label};

/// Hardest calibrated rain/fog level.
const WEATHER_LEVEL_MAX: f64 = 9.0;
/// Hardest calibrated hours-till-solar-noon.
const HOURS_MAX: f64 = 8.0;
/// Easiest and hardest calibrated altitudes, meters.
const ALT_EASY_M: f64 = 500.0;
const ALT_HARD_M: f64 = 6000.0;

fn attenuation(severity01: f64, g_min: f64) -> f64 {
    1.0 - (1.0 - g_min) * severity01.clamp(0.0, 1.0)
}

pub fn g_rain(rain_level: f64, g_min: f64) -> f64 {
    attenuation(rain_level / WEATHER_LEVEL_MAX, g_min)
}

pub fn g_fog(fog_level: f64, g_min: f64) -> f64 {
    attenuation(fog_level / WEATHER_LEVEL_MAX, g_min)
}

pub fn g_sun(hours_till_solar_noon: f64, g_min: f64) -> f64 {
    attenuation(hours_till_solar_noon / HOURS_MAX, g_min)
}

pub fn g_alt(altitude_m: f64, g_min: f64) -> f64 {
    attenuation((altitude_m - ALT_EASY_M) / (ALT_HARD_M - ALT_EASY_M), g_min)
}

/// Combined attenuation quality in (0, 1]: the four factors times concealment.
pub fn quality(params: &DetectionParams, weather: &Weather, altitude_m: f64, concealment: f64) -> f64 {
    g_rain(weather.rain_level, params.g_min)
        * g_fog(weather.fog_level, params.g_min)
        * g_sun(weather.hours_till_solar_noon, params.g_min)
        * g_alt(altitude_m, params.g_min)
        * concealment.clamp(0.0, 1.0)
}

/// Closed-form per-tick detection probability.
pub fn detection_probability(
    params: &DetectionParams,
    weather: &Weather,
    altitude_m: f64,
    concealment: f64,
) -> f64 {
    params.p_base * quality(params, weather, altitude_m, concealment)
}

/// Misclassification probability, ramping with mean normalized severity of
/// rain, fog, and sun angle.
pub fn misclassification_probability(params: &DetectionParams, weather: &Weather) -> f64 {
    let severity = ((weather.rain_level / WEATHER_LEVEL_MAX).clamp(0.0, 1.0)
        + (weather.fog_level / WEATHER_LEVEL_MAX).clamp(0.0, 1.0)
        + (weather.hours_till_solar_noon / HOURS_MAX).clamp(0.0, 1.0))
        / 3.0;
    params.p_mis_min + (params.p_mis_max - params.p_mis_min) * severity
}

/// Geometry of one sensing opportunity.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Sighting {
    pub bearing_deg: f64,
    pub range_m: f64,
}

/// One mission's sensing conditions.
#[derive(Debug, Clone, Copy)]
pub struct Sensor<'a> {
    pub params: &'a DetectionParams,
    pub weather: &'a Weather,
    pub altitude_m: f64,
}

impl Sensor<'_> {
    /// Draw an optional detection for an actor inside the footprint.
    ///
    /// Draw order within the stream is fixed: detection, confidence,
    /// misclassification. In ground-truth mode the sensor reports the true
    /// role with confidence 1.0 and consumes no draws.
    pub fn detect(
        &self,
        actor_id: &str,
        true_role: ActorRole,
        concealment: f64,
        sighting: Sighting,
        stream: &mut SeedStream,
    ) -> Option<DetectionEvent> {
        if self.params.ground_truth {
            return Some(DetectionEvent {
                actor_id: actor_id.to_string(),
                true_role,
                reported_label: Label::from_role(true_role),
                confidence: 1.0,
                bearing_deg: sighting.bearing_deg,
                range_m: sighting.range_m,
            });
        }

        let q = quality(self.params, self.weather, self.altitude_m, concealment);
        let p = self.params.p_base * q;
        if stream.next_f64() >= p {
            return None;
        }
        let confidence = (q * (1.0 - self.params.conf_noise * stream.next_f64())).clamp(0.0, 1.0);
        let true_label = Label::from_role(true_role);
        let reported_label = if matches!(true_label, Label::Target | Label::Bystander)
            && stream.next_f64() < misclassification_probability(self.params, self.weather)
        {
            match true_label {
                Label::Target => Label::Bystander,
                Label::Bystander => Label::Target,
                other => other,
            }
        } else {
            true_label
        };
        Some(DetectionEvent {
            actor_id: actor_id.to_string(),
            true_role,
            reported_label,
            confidence,
            bearing_deg: sighting.bearing_deg,
            range_m: sighting.range_m,
        })
    }
}
