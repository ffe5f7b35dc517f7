//! Control: lateral lane keeping, longitudinal speed tracking and two safety overrides.

use super::message::{BrakeMsg, ChassisMsg, ControlMsg, MotionLabel, PlanningMsg, PredictionMsg};
use super::planning::path_tangent;
use super::Route;
use crate::config::CyberConfiguration;
use crate::geometry::{Obb, Vec2};
use crate::scenario::Extent;

pub const MAX_ACCEL: f64 = 3.0;
pub const MAX_DECEL: f64 = 8.0;
const SPEED_GAIN: f64 = 1.0;
const LATERAL_GAIN: f64 = 0.3;
const HEADING_GAIN: f64 = 1.0;

#[derive(Debug, Clone)]
struct Params {
    max_speed: f64,
    collide_horizon: f64,
    collide_enabled: bool,
    max_steer: f64,
    throttle_deadband: f64,
    brake_deadband: f64,
    stop_hold_brake: f64,
    preview: f64,
    brake_threshold: f64,
}

pub struct Control {
    p: Params,
    route: Route,
    ego: Extent,
}

impl Control {
    pub fn new(cfg: &CyberConfiguration, route: Route, ego: Extent) -> Self {
        Self {
            p: Params {
                // km/h in the configuration.
                max_speed: cfg.real("control.MAX_SPEED") / 3.6,
                collide_horizon: cfg.real("control.collide_check_horizon"),
                collide_enabled: cfg.flag("control.collide_check_enabled"),
                max_steer: cfg.real("control.max_steer_deg").to_radians(),
                throttle_deadband: cfg.real("control.throttle_deadband"),
                brake_deadband: cfg.real("control.brake_deadband"),
                stop_hold_brake: cfg.real("control.stop_hold_brake"),
                preview: cfg.real("control.lateral_preview_s"),
                // Read from the perception namespace: the threshold gates the brake score
                // but is consumed where the brake is applied.
                brake_threshold: cfg.real("perception.BRAKE_THRESHOLD"),
            },
            route,
            ego,
        }
    }

    pub fn step(
        &mut self,
        chassis: &ChassisMsg,
        planning: &PlanningMsg,
        brake: &BrakeMsg,
        prediction: &PredictionMsg,
    ) -> ControlMsg {
        let v = chassis.speed;

        let e_l = self.route.lateral(chassis.position);
        let e_h = self.route.heading_error(chassis.heading);
        let preview = e_l + v * self.p.preview * e_h.sin();
        let delta = -(LATERAL_GAIN * preview + HEADING_GAIN * e_h);
        let steer = (delta / self.p.max_steer).clamp(-1.0, 1.0);

        let a_cmd = planning.target_accel + SPEED_GAIN * (planning.target_speed - v);
        let (mut throttle, mut brake_cmd) = if a_cmd >= 0.0 {
            ((a_cmd / MAX_ACCEL).min(1.0), 0.0)
        } else {
            (0.0, (-a_cmd / MAX_DECEL).min(1.0))
        };
        if throttle < self.p.throttle_deadband {
            throttle = 0.0;
        }
        if brake_cmd < self.p.brake_deadband {
            brake_cmd = 0.0;
        }
        if planning.target_speed < 0.05 && v < 0.1 {
            throttle = 0.0;
            brake_cmd = brake_cmd.max(self.p.stop_hold_brake);
        }

        let collide_flag = self.p.collide_enabled && self.imminent_collision(chassis, prediction);
        if collide_flag {
            throttle = 0.0;
            brake_cmd = 1.0;
        }
        let brake_override = brake.pred_brake > self.p.brake_threshold;
        if brake_override {
            throttle = 0.0;
            brake_cmd = 1.0;
        }
        if v > self.p.max_speed {
            throttle = 0.0;
        }

        ControlMsg {
            steer,
            throttle,
            brake: brake_cmd,
            collide_flag,
            brake_override,
        }
    }

    /// Predicted boxes (no buffers) against the ego box moved straight ahead.
    fn imminent_collision(&self, chassis: &ChassisMsg, prediction: &PredictionMsg) -> bool {
        let dir = Vec2::from_angle(chassis.heading);
        for o in &prediction.obstacles {
            if o.label == MotionLabel::Ignored {
                continue;
            }
            for (k, (t, pos)) in o.traj.iter().enumerate() {
                if *t > self.p.collide_horizon + 1e-9 {
                    break;
                }
                let ego = Obb::new(
                    chassis.position + dir * (chassis.speed * t),
                    chassis.heading,
                    self.ego.half_length,
                    self.ego.half_width,
                );
                let heading = path_tangent(o, k).unwrap_or(o.heading);
                let other = Obb::new(*pos, heading, o.half_length, o.half_width);
                if ego.overlaps(&other) {
                    return true;
                }
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ads::message::{Decision, PredictedObstacle};
    use crate::scenario::{ActorKind, Value};

    fn control(overrides: &[(&str, Value)]) -> Control {
        let mut cfg = CyberConfiguration::default();
        for (k, v) in overrides {
            cfg.assignments.insert((*k).into(), v.clone());
        }
        Control::new(
            &cfg,
            Route {
                origin: Vec2::ZERO,
                heading: 0.0,
                lane_half_width: 1.75,
                speed_limit: 8.0,
            },
            ActorKind::Ego.default_extent(),
        )
    }

    fn plan(speed: f64, accel: f64) -> PlanningMsg {
        PlanningMsg {
            lane_id: "lane_0".into(),
            decision: Decision::Cruise,
            target_obstacle: String::new(),
            target_speed: speed,
            target_accel: accel,
            stop_s: -1.0,
            traj: vec![],
        }
    }

    fn chassis(v: f64) -> ChassisMsg {
        ChassisMsg {
            position: Vec2::ZERO,
            heading: 0.0,
            speed: v,
        }
    }

    const CALM: BrakeMsg = BrakeMsg { pred_brake: 0.02 };

    #[test]
    fn tracks_target_speed() {
        let mut c = control(&[]);
        let m = c.step(&chassis(6.0), &plan(8.0, 0.0), &CALM, &PredictionMsg::default());
        assert!((m.throttle - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.brake, 0.0);
        assert_eq!(m.steer, 0.0);
        let m = c.step(&chassis(8.0), &plan(8.0, -4.0), &CALM, &PredictionMsg::default());
        assert_eq!(m.throttle, 0.0);
        assert!((m.brake - 0.5).abs() < 1e-12);
    }

    #[test]
    fn brake_score_override_is_strict() {
        let mut c = control(&[]);
        let hot = BrakeMsg { pred_brake: 0.2 };
        let m = c.step(&chassis(8.0), &plan(8.0, 0.0), &hot, &PredictionMsg::default());
        assert!(m.brake_override);
        assert_eq!(m.brake, 1.0);
        let mut c = control(&[("perception.BRAKE_THRESHOLD", Value::Real(0.2))]);
        let m = c.step(&chassis(8.0), &plan(8.0, 0.0), &hot, &PredictionMsg::default());
        assert!(!m.brake_override);
    }

    #[test]
    fn steers_back_to_lane() {
        let mut c = control(&[]);
        let mut ch = chassis(8.0);
        ch.position = Vec2::new(0.0, 1.0);
        let m = c.step(&ch, &plan(8.0, 0.0), &CALM, &PredictionMsg::default());
        assert!(m.steer < 0.0);
    }

    #[test]
    fn collide_check_brakes() {
        let o = PredictedObstacle {
            id: "o".into(),
            label: MotionLabel::Static,
            heading: 0.0,
            speed: 0.0,
            half_length: 2.3,
            half_width: 1.0,
            traj: vec![(0.0, Vec2::new(8.0, 0.0)), (0.5, Vec2::new(8.0, 0.0))],
        };
        let pred = PredictionMsg { obstacles: vec![o] };
        let mut c = control(&[]);
        let m = c.step(&chassis(8.0), &plan(8.0, 0.0), &CALM, &pred);
        assert!(m.collide_flag);
        assert_eq!(m.brake, 1.0);
        let mut c = control(&[("control.collide_check_enabled", Value::Bool(false))]);
        let m = c.step(&chassis(8.0), &plan(8.0, 0.0), &CALM, &pred);
        assert!(!m.collide_flag);
    }
}
