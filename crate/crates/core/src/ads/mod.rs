//! Toy modular driving stack: perception, prediction, planning and control exchanging
//! message trees over named channels, one bus round per simulator tick.

pub mod cmg;
pub mod control;
pub mod message;
pub mod perception;
pub mod planning;
pub mod prediction;

use std::sync::OnceLock;

use crate::config::{CyberConfiguration, ParameterSpec};
use crate::geometry::{angle_diff, Vec2};
use crate::scenario::{ActorState, Extent, MapEntityState, WeatherState};

pub use cmg::ChannelModuleGraph;
pub use message::{
    BrakeMsg, ChassisMsg, ControlMsg, MessageTree, PerceptionMsg, PlanningMsg, PredictionMsg,
};

pub const PERCEPTION: &str = "perception";
pub const PREDICTION: &str = "prediction";
pub const PLANNING: &str = "planning";
pub const CONTROL: &str = "control";
pub const MODULES: [&str; 4] = [PERCEPTION, PREDICTION, PLANNING, CONTROL];

pub const CH_CHASSIS: &str = "chassis";
pub const CH_OBSTACLES: &str = "perception/obstacles";
pub const CH_BRAKE: &str = "perception/brake";
pub const CH_PREDICTION: &str = "prediction";
pub const CH_PLANNING: &str = "planning";
pub const CH_CONTROL: &str = "control";
/// Channels in tick order.
pub const CHANNELS: [&str; 6] = [
    CH_CHASSIS,
    CH_OBSTACLES,
    CH_BRAKE,
    CH_PREDICTION,
    CH_PLANNING,
    CH_CONTROL,
];

pub fn is_known_channel(name: &str) -> bool {
    CHANNELS.contains(&name)
}

/// Every tunable parameter of the stack.
pub fn parameter_specs() -> &'static [ParameterSpec] {
    static SPECS: OnceLock<Vec<ParameterSpec>> = OnceLock::new();
    SPECS.get_or_init(|| {
        use ParameterSpec as P;
        vec![
            P::real(PERCEPTION, "BRAKE_THRESHOLD", 0.0, 1.0, 0.1),
            P::real(PERCEPTION, "sensor_range", 50.0, 300.0, 200.0),
            P::real(PERCEPTION, "fov_deg", 90.0, 360.0, 180.0),
            P::real(PERCEPTION, "min_visible_fraction", 0.0, 1.0, 0.0),
            P::real(PERCEPTION, "brake_cone_deg", 5.0, 45.0, 15.0),
            P::real(PERCEPTION, "truck_subtense_deg", 1.0, 20.0, 5.0),
            P::real(PERCEPTION, "light_lane_tolerance", 1.0, 10.0, 4.0),
            P::boolean(PERCEPTION, "light_detection", true),
            P::real(PREDICTION, "still_obstacle_speed_threshold", 0.0, 2.0, 0.99),
            P::real(PREDICTION, "dist_threshold_static", 0.0, 5.0, 1.0),
            P::real(PREDICTION, "prediction_horizon_s", 1.0, 10.0, 5.0),
            P::real(PREDICTION, "prediction_step_s", 0.1, 1.0, 0.5),
            P::real(PREDICTION, "prediction_range", 10.0, 200.0, 60.0),
            P::real(PREDICTION, "max_obstacles", 1.0, 64.0, 32.0),
            P::real(PREDICTION, "vru_static_speed", 0.0, 1.0, 0.2),
            P::real(PREDICTION, "vru_cross_speed", 0.5, 3.0, 1.2),
            P::real(PLANNING, "yield_distance", 0.0, 20.0, 5.0),
            P::real(PLANNING, "kADCSafetyLBuffer", 0.0, 3.0, 0.1),
            P::real(PLANNING, "obstacle_lat_buffer", 0.0, 1.5, 0.3),
            P::real(PLANNING, "kMinOvertakeDistance", 0.0, 100.0, 10.0),
            P::real(PLANNING, "kOvertakeTimeBuffer", 0.0, 10.0, 3.0),
            P::real(PLANNING, "dist_threshold_moving", 0.0, 10.0, 2.5),
            P::real(PLANNING, "planning_lookahead", 20.0, 200.0, 80.0),
            P::real(PLANNING, "plan_horizon_s", 1.0, 10.0, 5.0),
            P::real(CONTROL, "MAX_SPEED", 30.0, 60.0, 35.0),
            P::real(CONTROL, "collide_check_horizon", 0.0, 3.0, 1.0),
            P::boolean(CONTROL, "collide_check_enabled", true),
            P::real(CONTROL, "max_steer_deg", 10.0, 45.0, 30.0),
            P::real(CONTROL, "throttle_deadband", 0.0, 0.2, 0.01),
            P::real(CONTROL, "brake_deadband", 0.0, 0.2, 0.01),
            P::real(CONTROL, "stop_hold_brake", 0.0, 1.0, 0.3),
            P::real(CONTROL, "lateral_preview_s", 0.0, 2.0, 0.5),
        ]
    })
}

pub fn find_spec(key: &str) -> Option<&'static ParameterSpec> {
    parameter_specs().iter().find(|s| s.key() == key)
}

pub fn module_specs(module: &str) -> Vec<&'static ParameterSpec> {
    parameter_specs().iter().filter(|s| s.module == module).collect()
}

/// The graph of the assembled stack. It does not depend on the execution.
pub fn extract_cmg() -> ChannelModuleGraph {
    let mut g = ChannelModuleGraph::new();
    for m in MODULES {
        g.add_module(m);
    }
    for c in CHANNELS {
        g.add_channel(c);
    }
    g.reads(PERCEPTION, CH_CHASSIS);
    g.writes(PERCEPTION, CH_OBSTACLES);
    g.writes(PERCEPTION, CH_BRAKE);
    g.reads(PREDICTION, CH_OBSTACLES);
    g.reads(PREDICTION, CH_CHASSIS);
    g.writes(PREDICTION, CH_PREDICTION);
    g.reads(PLANNING, CH_PREDICTION);
    g.reads(PLANNING, CH_CHASSIS);
    g.writes(PLANNING, CH_PLANNING);
    g.reads(CONTROL, CH_PLANNING);
    g.reads(CONTROL, CH_BRAKE);
    g.reads(CONTROL, CH_PREDICTION);
    g.reads(CONTROL, CH_CHASSIS);
    g.writes(CONTROL, CH_CONTROL);
    g
}

/// The ego lane: a straight line through the ego's start pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Route {
    pub origin: Vec2,
    pub heading: f64,
    pub lane_half_width: f64,
    pub speed_limit: f64,
}

impl Route {
    pub fn dir(&self) -> Vec2 {
        Vec2::from_angle(self.heading)
    }

    pub fn station(&self, p: Vec2) -> f64 {
        (p - self.origin).dot(self.dir())
    }

    /// Signed offset to the left of the lane center.
    pub fn lateral(&self, p: Vec2) -> f64 {
        (p - self.origin).dot(self.dir().perp())
    }

    pub fn point(&self, s: f64, l: f64) -> Vec2 {
        self.origin + self.dir() * s + self.dir().perp() * l
    }

    pub fn heading_error(&self, h: f64) -> f64 {
        angle_diff(h, self.heading)
    }
}

/// What the stack can sense in one tick.
pub struct WorldView<'a> {
    pub ego: &'a ActorState,
    pub others: &'a [ActorState],
    pub map_entities: &'a [MapEntityState],
    pub weather: &'a WeatherState,
}

/// Actuator command produced by control.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Command {
    pub steer: f64,
    pub throttle: f64,
    pub brake: f64,
}

/// Messages published during one tick, in channel order.
#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub chassis: ChassisMsg,
    pub perception: PerceptionMsg,
    pub brake: BrakeMsg,
    pub prediction: PredictionMsg,
    pub planning: PlanningMsg,
    pub control: ControlMsg,
}

impl TickOutput {
    pub fn trees(&self) -> [(&'static str, MessageTree); 6] {
        [
            (CH_CHASSIS, self.chassis.to_tree()),
            (CH_OBSTACLES, self.perception.to_tree()),
            (CH_BRAKE, self.brake.to_tree()),
            (CH_PREDICTION, self.prediction.to_tree()),
            (CH_PLANNING, self.planning.to_tree()),
            (CH_CONTROL, self.control.to_tree()),
        ]
    }

    pub fn command(&self) -> Command {
        Command {
            steer: self.control.steer,
            throttle: self.control.throttle,
            brake: self.control.brake,
        }
    }
}

pub struct Ads {
    perception: perception::Perception,
    prediction: prediction::Prediction,
    planning: planning::Planning,
    control: control::Control,
}

impl Ads {
    pub fn new(cfg: &CyberConfiguration, route: Route, ego_extent: Extent) -> Self {
        Self {
            perception: perception::Perception::new(cfg),
            prediction: prediction::Prediction::new(cfg, route),
            planning: planning::Planning::new(cfg, route, ego_extent),
            control: control::Control::new(cfg, route, ego_extent),
        }
    }

    pub fn tick(&mut self, world: &WorldView<'_>) -> TickOutput {
        let chassis = ChassisMsg {
            position: world.ego.position,
            heading: world.ego.heading,
            speed: world.ego.speed,
        };
        let (perception, brake) = self.perception.step(world);
        let (prediction, planning, control) = self.downstream(&chassis, &perception, &brake);
        TickOutput {
            chassis,
            perception,
            brake,
            prediction,
            planning,
            control,
        }
    }

    /// Runs the modules downstream of perception on given inputs. Feeding recorded
    /// chassis and perception messages regenerates the recorded downstream messages.
    pub fn downstream(
        &mut self,
        chassis: &ChassisMsg,
        perception: &PerceptionMsg,
        brake: &BrakeMsg,
    ) -> (PredictionMsg, PlanningMsg, ControlMsg) {
        let prediction = self.prediction.step(chassis, perception);
        let planning = self.planning.step(chassis, &prediction);
        let control = self.control.step(chassis, &planning, brake, &prediction);
        (prediction, planning, control)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::check_specs;

    #[test]
    fn cmg_shape() {
        let g = extract_cmg();
        assert!(g.is_bipartite());
        assert_eq!(g.modules.len(), 4);
        assert_eq!(g.writers(CH_CONTROL), vec![CONTROL]);
        assert!(g.writers(CH_CHASSIS).is_empty());
        let reach = g.reverse_reach(&cmg::Vertex::channel(CH_CONTROL));
        assert!(reach.contains_key(&cmg::Vertex::module(PREDICTION)));
        assert!(!g.has_module_cycle_avoiding(CH_CHASSIS));
        assert_eq!(extract_cmg(), g);
    }

    #[test]
    fn specs_are_consistent() {
        check_specs(parameter_specs()).unwrap();
        for m in MODULES {
            let n = module_specs(m).len();
            assert!(n * 4 <= parameter_specs().len(), "{m} owns {n} parameters");
        }
        for name in [
            "still_obstacle_speed_threshold",
            "obstacle_lat_buffer",
            "kMinOvertakeDistance",
            "yield_distance",
            "kOvertakeTimeBuffer",
            "kADCSafetyLBuffer",
            "BRAKE_THRESHOLD",
            "MAX_SPEED",
            "dist_threshold_moving",
            "dist_threshold_static",
        ] {
            assert!(parameter_specs().iter().any(|s| s.name == name), "{name} missing");
        }
    }

    #[test]
    fn route_frame() {
        let r = Route {
            origin: Vec2::new(1.0, 1.0),
            heading: std::f64::consts::FRAC_PI_2,
            lane_half_width: 1.75,
            speed_limit: 8.0,
        };
        let p = r.point(3.0, -2.0);
        assert!((r.station(p) - 3.0).abs() < 1e-12);
        assert!((r.lateral(p) + 2.0).abs() < 1e-12);
    }
}
