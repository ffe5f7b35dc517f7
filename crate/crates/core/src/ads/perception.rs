//! Perception surrogate: visibility-gated obstacle list and a rule-based brake score.

use std::collections::BTreeMap;

use super::message::{BrakeMsg, PerceivedLight, PerceivedObstacle, PerceptionMsg};
use super::WorldView;
use crate::config::CyberConfiguration;
use crate::geometry::{angle_diff, Obb, Vec2};
use crate::scenario::{ActorKind, Color, LightPolicy, MapEntityKind};
use crate::sim::visibility::{visible_fraction, Sensor};

/// Brake scores emitted by the surrogate.
pub const RED_LIGHT_SCORE: f64 = 0.9;
pub const RED_TRUCK_SCORE: f64 = 0.2;
pub const DEFAULT_SCORE: f64 = 0.02;

#[derive(Debug, Clone)]
struct Params {
    sensor_range: f64,
    fov: f64,
    min_visible_fraction: f64,
    brake_cone: f64,
    truck_subtense: f64,
    light_lane_tolerance: f64,
    light_detection: bool,
}

pub struct Perception {
    p: Params,
    /// Last observed position per obstacle id, for the course estimate.
    history: BTreeMap<String, (Vec2, f64)>,
}

impl Perception {
    pub fn new(cfg: &CyberConfiguration) -> Self {
        Self {
            p: Params {
                sensor_range: cfg.real("perception.sensor_range"),
                fov: cfg.real("perception.fov_deg").to_radians(),
                min_visible_fraction: cfg.real("perception.min_visible_fraction"),
                brake_cone: cfg.real("perception.brake_cone_deg").to_radians(),
                truck_subtense: cfg.real("perception.truck_subtense_deg").to_radians(),
                light_lane_tolerance: cfg.real("perception.light_lane_tolerance"),
                light_detection: cfg.flag("perception.light_detection"),
            },
            history: BTreeMap::new(),
        }
    }

    pub fn step(&mut self, world: &WorldView<'_>) -> (PerceptionMsg, BrakeMsg) {
        let sensor = Sensor::mounted_on(world.ego, self.p.fov, self.p.sensor_range);

        // Occluders: enabled solid map entities and every non-ego actor.
        let mut occluders: Vec<(&str, Obb)> = world
            .map_entities
            .iter()
            .filter(|m| m.enabled && m.kind.is_solid())
            .map(|m| (m.id.as_str(), m.obb()))
            .collect();
        occluders.extend(world.others.iter().map(|a| (a.id.as_str(), a.obb())));
        let visibility = |id: &str, target: &Obb| {
            let blockers: Vec<Obb> = occluders
                .iter()
                .filter(|(oid, _)| *oid != id)
                .map(|(_, o)| *o)
                .collect();
            visible_fraction(&sensor, target, &blockers, world.weather)
        };

        let mut obstacles = Vec::new();
        let mut red_truck = false;
        for a in world.others {
            let vis = visibility(&a.id, &a.obb());
            if vis <= self.p.min_visible_fraction {
                continue;
            }
            let course = self.course(&a.id, a.position, a.heading);
            if a.kind == ActorKind::Truck && a.color == Color::Red && vis > 0.0 {
                let bearing = angle_diff((a.position - sensor.origin).angle(), sensor.heading);
                if bearing.abs() <= self.p.brake_cone
                    && subtense(sensor.origin, &a.obb()) > self.p.truck_subtense
                {
                    red_truck = true;
                }
            }
            obstacles.push(PerceivedObstacle {
                id: a.id.clone(),
                kind: a.kind.label().into(),
                color: a.color.label().into(),
                position: a.position,
                heading: a.heading,
                course,
                speed: a.speed,
                half_length: a.extent.half_length,
                half_width: a.extent.half_width,
                visible: vis,
            });
        }
        for m in world.map_entities.iter().filter(|m| {
            m.enabled && matches!(m.kind, MapEntityKind::TrafficCone | MapEntityKind::Box)
        }) {
            let vis = visibility(&m.id, &m.obb());
            if vis <= self.p.min_visible_fraction {
                continue;
            }
            obstacles.push(PerceivedObstacle {
                id: m.id.clone(),
                kind: m.kind.label().into(),
                color: "none".into(),
                position: m.position,
                heading: m.heading,
                course: m.heading,
                speed: 0.0,
                half_length: m.extent.half_length,
                half_width: m.extent.half_width,
                visible: vis,
            });
        }
        obstacles.sort_by(|a, b| a.id.cmp(&b.id));

        let mut lights = Vec::new();
        let mut red_light = false;
        if self.p.light_detection {
            let ahead = Vec2::from_angle(sensor.heading);
            for m in world
                .map_entities
                .iter()
                .filter(|m| m.enabled && m.kind == MapEntityKind::TrafficLight)
            {
                let Some(policy) = m.light_policy else { continue };
                if visibility(&m.id, &m.obb()) <= 0.0 {
                    continue;
                }
                let rel = m.position - sensor.origin;
                let governs = rel.dot(ahead) > 0.0
                    && rel.dot(ahead.perp()).abs() <= self.p.light_lane_tolerance;
                if governs && policy == LightPolicy::Red {
                    red_light = true;
                }
                lights.push(PerceivedLight {
                    id: m.id.clone(),
                    state: policy.label().into(),
                    position: m.position,
                });
            }
        }

        let pred_brake = if red_light {
            RED_LIGHT_SCORE
        } else if red_truck {
            RED_TRUCK_SCORE
        } else {
            DEFAULT_SCORE
        };
        (PerceptionMsg { obstacles, lights }, BrakeMsg { pred_brake })
    }

    fn course(&mut self, id: &str, pos: Vec2, heading: f64) -> f64 {
        let course = match self.history.get(id) {
            Some((prev, c)) => {
                let d = pos - *prev;
                if d.norm() > 1e-9 {
                    crate::geometry::wrap_angle(d.angle())
                } else {
                    *c
                }
            }
            None => heading,
        };
        self.history.insert(id.to_string(), (pos, course));
        course
    }
}

/// Angular width of a box seen from `from`, radians.
pub fn subtense(from: Vec2, target: &Obb) -> f64 {
    let center = (target.center - from).angle();
    let (lo, hi) = target
        .corners()
        .iter()
        .map(|c| angle_diff((*c - from).angle(), center))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| (lo.min(a), hi.max(a)));
    hi - lo
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ActorState, Extent, MapEntityState, WeatherState};

    fn actor(id: &str, kind: ActorKind, color: Color, x: f64, y: f64) -> ActorState {
        ActorState {
            id: id.into(),
            kind,
            color,
            position: Vec2::new(x, y),
            heading: 0.0,
            speed: 5.0,
            extent: kind.default_extent(),
        }
    }

    fn light(policy: LightPolicy, x: f64) -> MapEntityState {
        MapEntityState {
            id: "light".into(),
            kind: MapEntityKind::TrafficLight,
            position: Vec2::new(x, 2.0),
            heading: 0.0,
            enabled: true,
            light_policy: Some(policy),
            extent: Extent::new(0.3, 0.3),
        }
    }

    fn run(others: &[ActorState], entities: &[MapEntityState]) -> (PerceptionMsg, BrakeMsg) {
        let ego = actor("ego", ActorKind::Ego, Color::Blue, 0.0, 0.0);
        let weather = WeatherState::default();
        let mut p = Perception::new(&CyberConfiguration::default());
        p.step(&WorldView {
            ego: &ego,
            others,
            map_entities: entities,
            weather: &weather,
        })
    }

    #[test]
    fn red_light_ahead_scores_high() {
        let (_, b) = run(&[], &[light(LightPolicy::Red, 30.0)]);
        assert_eq!(b.pred_brake, RED_LIGHT_SCORE);
        let (_, b) = run(&[], &[light(LightPolicy::Green, 30.0)]);
        assert_eq!(b.pred_brake, DEFAULT_SCORE);
    }

    #[test]
    fn red_truck_in_cone() {
        let truck = actor("t", ActorKind::Truck, Color::Red, 25.0, 3.0);
        let (_, b) = run(std::slice::from_ref(&truck), &[]);
        assert_eq!(b.pred_brake, RED_TRUCK_SCORE);
        let mut blue = truck.clone();
        blue.color = Color::Blue;
        assert_eq!(run(&[blue], &[]).1.pred_brake, DEFAULT_SCORE);
        // Far away the truck subtends less than the threshold.
        let mut far = truck;
        far.position = Vec2::new(150.0, 3.0);
        assert_eq!(run(&[far], &[]).1.pred_brake, DEFAULT_SCORE);
    }

    #[test]
    fn empty_road_defaults() {
        let (m, b) = run(&[], &[]);
        assert!(m.obstacles.is_empty());
        assert_eq!(b.pred_brake, DEFAULT_SCORE);
    }

    #[test]
    fn disabled_building_does_not_occlude() {
        let car = actor("car", ActorKind::Sedan, Color::White, 20.0, 0.0);
        let mut building = MapEntityState {
            id: "b".into(),
            kind: MapEntityKind::Building,
            position: Vec2::new(10.0, 0.0),
            heading: 0.0,
            enabled: true,
            light_policy: None,
            extent: Extent::new(2.0, 6.0),
        };
        let (m, _) = run(std::slice::from_ref(&car), std::slice::from_ref(&building));
        assert!(m.obstacles.is_empty());
        building.enabled = false;
        let (m, _) = run(&[car], &[building]);
        assert_eq!(m.obstacles.len(), 1);
        assert_eq!(m.obstacles[0].visible, 1.0);
    }

    #[test]
    fn subtense_of_box_ahead() {
        let b = Obb::new(Vec2::new(10.0, 0.0), 0.0, 0.5, 1.0);
        let expected = 2.0 * (1.0f64 / 9.5).atan();
        assert!((subtense(Vec2::ZERO, &b) - expected).abs() < 1e-12);
    }
}
