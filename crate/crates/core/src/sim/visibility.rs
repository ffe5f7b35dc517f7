//! Line-of-sight sampling from the ego sensor.

use crate::geometry::{angle_diff, Obb, Vec2};
use crate::scenario::{ActorState, WeatherState};

/// Boundary samples per target edge.
const SAMPLES_PER_EDGE: usize = 4;

pub const DEFAULT_SENSOR_RANGE: f64 = 200.0;
pub const DEFAULT_FOV: f64 = std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensor {
    pub origin: Vec2,
    pub heading: f64,
    /// Full field of view, radians.
    pub fov: f64,
    /// Clear-air range, meters.
    pub range: f64,
}

impl Sensor {
    /// Sensor mounted at the front center of `ego`.
    pub fn mounted_on(ego: &ActorState, fov: f64, range: f64) -> Self {
        Self {
            origin: ego.position + Vec2::from_angle(ego.heading) * ego.extent.half_length,
            heading: ego.heading,
            fov,
            range,
        }
    }

    pub fn effective_range(&self, weather: &WeatherState) -> f64 {
        self.range * (1.0 - weather.fog_density / 100.0)
    }

    fn sees_point(&self, p: Vec2, range: f64) -> bool {
        let d = p - self.origin;
        if d.norm() > range {
            return false;
        }
        if d.norm_sq() < 1e-18 {
            return true;
        }
        angle_diff(d.angle(), self.heading).abs() <= self.fov / 2.0 + 1e-12
    }
}

/// Fraction of the target's boundary samples that are in range, inside the field of view,
/// and not hidden behind any occluder.
pub fn visible_fraction(sensor: &Sensor, target: &Obb, occluders: &[Obb], weather: &WeatherState) -> f64 {
    let range = sensor.effective_range(weather);
    let samples = target.boundary_samples(SAMPLES_PER_EDGE);
    let seen = samples
        .iter()
        .filter(|p| sensor.sees_point(**p, range))
        .filter(|p| !occluders.iter().any(|o| o.blocks_segment(sensor.origin, **p)))
        .count();
    seen as f64 / samples.len() as f64
}

/// Visibility of `target` from `from` with the default frontal sensor.
pub fn visibility_query(from: &ActorState, target: &Obb, occluders: &[Obb], weather: &WeatherState) -> f64 {
    let sensor = Sensor::mounted_on(from, DEFAULT_FOV, DEFAULT_SENSOR_RANGE);
    visible_fraction(&sensor, target, occluders, weather)
}
