//! Prediction surrogate: static/moving labeling and constant-velocity extrapolation.

use super::message::{
    ChassisMsg, MotionLabel, PerceivedObstacle, PerceptionMsg, PredictedObstacle, PredictionMsg,
};
use super::Route;
use crate::config::CyberConfiguration;
use crate::geometry::Vec2;

#[derive(Debug, Clone)]
struct Params {
    still_speed: f64,
    dist_threshold_static: f64,
    horizon: f64,
    step: f64,
    range: f64,
    max_obstacles: usize,
    vru_static_speed: f64,
    vru_cross_speed: f64,
}

pub struct Prediction {
    p: Params,
    route: Route,
}

impl Prediction {
    pub fn new(cfg: &CyberConfiguration, route: Route) -> Self {
        Self {
            p: Params {
                still_speed: cfg.real("prediction.still_obstacle_speed_threshold"),
                dist_threshold_static: cfg.real("prediction.dist_threshold_static"),
                horizon: cfg.real("prediction.prediction_horizon_s"),
                step: cfg.real("prediction.prediction_step_s"),
                range: cfg.real("prediction.prediction_range"),
                max_obstacles: cfg.real("prediction.max_obstacles").round() as usize,
                vru_static_speed: cfg.real("prediction.vru_static_speed"),
                vru_cross_speed: cfg.real("prediction.vru_cross_speed"),
            },
            route,
        }
    }

    pub fn step(&mut self, chassis: &ChassisMsg, perception: &PerceptionMsg) -> PredictionMsg {
        // Keep the nearest `max_obstacles` within range; everything else is ignored.
        let mut ranked: Vec<(f64, usize)> = perception
            .obstacles
            .iter()
            .enumerate()
            .map(|(i, o)| (o.position.distance(chassis.position), i))
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut tracked = vec![false; perception.obstacles.len()];
        for (dist, i) in ranked.iter().take(self.p.max_obstacles) {
            tracked[*i] = *dist <= self.p.range;
        }

        let obstacles = perception
            .obstacles
            .iter()
            .zip(tracked)
            .map(|(o, keep)| {
                if keep {
                    self.predict(o)
                } else {
                    PredictedObstacle {
                        id: o.id.clone(),
                        label: MotionLabel::Ignored,
                        heading: 0.0,
                        speed: 0.0,
                        half_length: 0.0,
                        half_width: 0.0,
                        traj: Vec::new(),
                    }
                }
            })
            .collect();
        PredictionMsg { obstacles }
    }

    /// Moving iff the speed estimate reaches the stillness threshold.
    pub fn label(&self, o: &PerceivedObstacle) -> MotionLabel {
        let vru = o.kind == "pedestrian" || o.kind == "cyclist";
        if vru && o.speed < self.p.vru_static_speed {
            let l = self.route.lateral(o.position).abs();
            let outside = l - self.route.lane_half_width;
            if outside > 0.0 && outside <= self.p.dist_threshold_static {
                return MotionLabel::Crossing;
            }
        }
        if o.speed < self.p.still_speed {
            MotionLabel::Static
        } else {
            MotionLabel::Moving
        }
    }

    fn predict(&self, o: &PerceivedObstacle) -> PredictedObstacle {
        let label = self.label(o);
        let velocity = match label {
            MotionLabel::Moving => Vec2::from_angle(o.course) * o.speed,
            MotionLabel::Crossing => {
                let side = self.route.lateral(o.position).signum();
                self.route.dir().perp() * (-side * self.p.vru_cross_speed)
            }
            _ => Vec2::ZERO,
        };
        let n = (self.p.horizon / self.p.step + 1e-9).floor() as usize;
        let traj = (0..=n)
            .map(|k| {
                let t = k as f64 * self.p.step;
                (t, o.position + velocity * t)
            })
            .collect();
        PredictedObstacle {
            id: o.id.clone(),
            label,
            heading: o.heading,
            speed: o.speed,
            half_length: o.half_length,
            half_width: o.half_width,
            traj,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn route() -> Route {
        Route {
            origin: Vec2::ZERO,
            heading: 0.0,
            lane_half_width: 1.75,
            speed_limit: 8.0,
        }
    }

    fn obstacle(speed: f64, kind: &str, y: f64) -> PerceivedObstacle {
        PerceivedObstacle {
            id: "o".into(),
            kind: kind.into(),
            color: "white".into(),
            position: Vec2::new(20.0, y),
            heading: std::f64::consts::FRAC_PI_2,
            course: std::f64::consts::FRAC_PI_2,
            speed,
            half_length: 2.3,
            half_width: 1.0,
            visible: 1.0,
        }
    }

    fn with_threshold(th: f64) -> Prediction {
        let mut cfg = CyberConfiguration::default();
        cfg.assignments.insert(
            "prediction.still_obstacle_speed_threshold".into(),
            crate::scenario::Value::Real(th),
        );
        Prediction::new(&cfg, route())
    }

    #[test]
    fn slow_car_labels() {
        assert_eq!(with_threshold(0.99).label(&obstacle(0.98, "sedan", -5.0)), MotionLabel::Static);
        assert_eq!(with_threshold(0.50).label(&obstacle(0.98, "sedan", -5.0)), MotionLabel::Moving);
        assert_eq!(with_threshold(0.01).label(&obstacle(0.0, "sedan", -5.0)), MotionLabel::Static);
    }

    #[test]
    fn moving_obstacle_extrapolates() {
        let p = with_threshold(0.5);
        let chassis = ChassisMsg {
            position: Vec2::ZERO,
            heading: 0.0,
            speed: 8.0,
        };
        let msg = p.clone_step(&chassis, &[obstacle(1.0, "sedan", -5.0)]);
        let o = &msg.obstacles[0];
        assert_eq!(o.traj.len(), 11);
        let (t, last) = o.traj[10];
        assert_eq!(t, 5.0);
        assert!((last.y - 0.0).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_ignored() {
        let p = with_threshold(0.5);
        let chassis = ChassisMsg {
            position: Vec2::new(-100.0, 0.0),
            heading: 0.0,
            speed: 8.0,
        };
        let msg = p.clone_step(&chassis, &[obstacle(1.0, "sedan", -5.0)]);
        assert_eq!(msg.obstacles[0].label, MotionLabel::Ignored);
    }

    #[test]
    fn curbside_pedestrian_predicted_to_cross() {
        let p = with_threshold(0.99);
        let ped = obstacle(0.0, "pedestrian", -2.5);
        assert_eq!(p.label(&ped), MotionLabel::Crossing);
        let far = obstacle(0.0, "pedestrian", -5.0);
        assert_eq!(p.label(&far), MotionLabel::Static);
    }

    impl Prediction {
        fn clone_step(&self, chassis: &ChassisMsg, obs: &[PerceivedObstacle]) -> PredictionMsg {
            let mut me = Prediction {
                p: self.p.clone(),
                route: self.route,
            };
            me.step(
                chassis,
                &PerceptionMsg {
                    obstacles: obs.to_vec(),
                    lights: vec![],
                },
            )
        }
    }
}
