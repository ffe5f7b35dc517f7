//! Planning: overlap of predicted obstacle boxes with the ego corridor, then a
//! cruise / yield / overtake / stop decision and a speed profile.

use super::message::{
    ChassisMsg, Decision, MotionLabel, PlanPoint, PlanningMsg, PredictedObstacle, PredictionMsg,
};
use super::Route;
use crate::config::CyberConfiguration;
use crate::geometry::Obb;
use crate::scenario::Extent;

/// Highest deceleration a yield plan may ask for when first committed.
pub const COMFORT_DECEL: f64 = 4.0;
/// Below this required deceleration the ego keeps rolling toward the stop point.
pub const FOLLOW_DECEL: f64 = 0.5;
pub const HARD_DECEL: f64 = 8.0;
/// Speed factor used when a yield is infeasible and the ego commits to passing first.
pub const FORCED_PASS_FACTOR: f64 = 1.2;
const PLAN_POINTS: usize = 8;
const PLAN_STEP: f64 = 0.5;

#[derive(Debug, Clone)]
struct Params {
    yield_distance: f64,
    adc_buffer: f64,
    lat_buffer: f64,
    min_overtake_distance: f64,
    overtake_time_buffer: f64,
    dist_threshold_moving: f64,
    lookahead: f64,
    horizon: f64,
}

/// First predicted overlap of one obstacle with the corridor.
#[derive(Debug, Clone, PartialEq)]
pub struct Conflict {
    pub id: String,
    /// Predicted time of the first overlap.
    pub t: f64,
    /// Route station of the nearest edge of the overlapping box.
    pub s: f64,
    pub moving: bool,
}

pub struct Planning {
    p: Params,
    route: Route,
    ego: Extent,
    committed_yield: Option<String>,
}

impl Planning {
    pub fn new(cfg: &CyberConfiguration, route: Route, ego: Extent) -> Self {
        Self {
            p: Params {
                yield_distance: cfg.real("planning.yield_distance"),
                adc_buffer: cfg.real("planning.kADCSafetyLBuffer"),
                lat_buffer: cfg.real("planning.obstacle_lat_buffer"),
                min_overtake_distance: cfg.real("planning.kMinOvertakeDistance"),
                overtake_time_buffer: cfg.real("planning.kOvertakeTimeBuffer"),
                dist_threshold_moving: cfg.real("planning.dist_threshold_moving"),
                lookahead: cfg.real("planning.planning_lookahead"),
                horizon: cfg.real("planning.plan_horizon_s"),
            },
            route,
            ego,
            committed_yield: None,
        }
    }

    fn corridor(&self, s_ego: f64) -> Obb {
        let s0 = s_ego - self.ego.half_length;
        let s1 = s_ego + self.p.lookahead;
        let center = self.route.point((s0 + s1) / 2.0, 0.0);
        Obb::new(center, self.route.heading, (s1 - s0) / 2.0, self.ego.half_width)
    }

    /// Box of an obstacle at predicted sample `k`, oriented along the predicted path.
    fn predicted_box(&self, o: &PredictedObstacle, k: usize) -> Obb {
        let heading = path_tangent(o, k).unwrap_or(o.heading);
        Obb::new(
            o.traj[k].1,
            heading,
            o.half_length,
            o.half_width + self.p.lat_buffer + self.p.adc_buffer,
        )
    }

    pub fn conflicts(&self, chassis: &ChassisMsg, prediction: &PredictionMsg) -> Vec<Conflict> {
        let s_ego = self.route.station(chassis.position);
        let s_front = s_ego + self.ego.half_length;
        let corridor = self.corridor(s_ego);
        let mut out = Vec::new();
        for o in &prediction.obstacles {
            if o.label == MotionLabel::Ignored {
                continue;
            }
            let moving = o.label != MotionLabel::Static;
            for k in 0..o.traj.len() {
                if o.traj[k].0 > self.p.horizon + 1e-9 {
                    break;
                }
                let b = self.predicted_box(o, k);
                if !b.overlaps(&corridor) {
                    continue;
                }
                let stations = b.corners().map(|c| self.route.station(c));
                let s_min = stations.iter().copied().fold(f64::INFINITY, f64::min);
                let s_max = stations.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let behind = if moving {
                    s_max < s_front - self.p.dist_threshold_moving
                } else {
                    s_max < s_front
                };
                if !behind {
                    out.push(Conflict {
                        id: o.id.clone(),
                        t: o.traj[k].0,
                        s: s_min,
                        moving,
                    });
                }
                break;
            }
        }
        out
    }

    pub fn step(&mut self, chassis: &ChassisMsg, prediction: &PredictionMsg) -> PlanningMsg {
        let v = chassis.speed;
        let limit = self.route.speed_limit;
        let s_ego = self.route.station(chassis.position);
        let s_front = s_ego + self.ego.half_length;

        let conflicts = self.conflicts(chassis, prediction);
        let nearest = conflicts
            .iter()
            .min_by(|a, b| a.s.total_cmp(&b.s).then_with(|| a.id.cmp(&b.id)));

        let (decision, target, speed, accel, stop_s) = match nearest {
            None => {
                self.committed_yield = None;
                (Decision::Cruise, String::new(), limit, 0.0, -1.0)
            }
            Some(c) => {
                let gap = c.s - s_front;
                let t_ego = gap / v.max(0.1);
                let pass_first = c.moving
                    && c.t - t_ego > self.p.overtake_time_buffer
                    && gap > self.p.min_overtake_distance;
                let stop_s = c.s - self.p.yield_distance;
                let dist = stop_s - s_front;
                let committed = self.committed_yield.as_deref() == Some(c.id.as_str());
                let feasible = dist > 0.0 && v * v / (2.0 * dist) <= COMFORT_DECEL;
                if pass_first {
                    self.committed_yield = None;
                    (Decision::Overtake, c.id.clone(), limit, 0.0, -1.0)
                } else if committed || feasible {
                    self.committed_yield = Some(c.id.clone());
                    let (speed, accel) = yield_profile(v, dist, limit);
                    (Decision::Yield, c.id.clone(), speed, accel, stop_s)
                } else if c.moving {
                    (Decision::Overtake, c.id.clone(), limit * FORCED_PASS_FACTOR, 0.0, -1.0)
                } else {
                    let accel = if v > 0.05 { -HARD_DECEL } else { 0.0 };
                    (Decision::Stop, c.id.clone(), 0.0, accel, c.s)
                }
            }
        };

        let traj = (0..PLAN_POINTS)
            .map(|k| {
                let t = k as f64 * PLAN_STEP;
                let vk = if accel < 0.0 {
                    (v + accel * t).max(0.0)
                } else {
                    speed
                };
                let s = s_ego + t * (v + vk) / 2.0;
                PlanPoint {
                    t,
                    position: self.route.point(s, 0.0),
                    speed: vk,
                }
            })
            .collect();

        PlanningMsg {
            lane_id: "lane_0".into(),
            decision,
            target_obstacle: target,
            target_speed: speed,
            target_accel: accel,
            stop_s,
            traj,
        }
    }
}

/// Target speed and acceleration that bring the ego to rest `dist` meters ahead.
fn yield_profile(v: f64, dist: f64, limit: f64) -> (f64, f64) {
    if dist <= 0.05 {
        return (0.0, if v > 0.05 { -HARD_DECEL } else { 0.0 });
    }
    let required = v * v / (2.0 * dist);
    if required >= FOLLOW_DECEL {
        (v, -required.min(HARD_DECEL))
    } else {
        (limit.min((2.0 * FOLLOW_DECEL * dist).sqrt()), 0.0)
    }
}

/// Heading of the predicted path at sample `k`, if the path moves there.
pub(crate) fn path_tangent(o: &PredictedObstacle, k: usize) -> Option<f64> {
    let pts = &o.traj;
    let (a, b) = if k + 1 < pts.len() {
        (pts[k].1, pts[k + 1].1)
    } else if k > 0 {
        (pts[k - 1].1, pts[k].1)
    } else {
        return None;
    };
    let d = b - a;
    (d.norm() > 1e-9).then(|| crate::geometry::wrap_angle(d.angle()))
}
