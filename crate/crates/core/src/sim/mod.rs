//! Fixed-step 2D world: scripted actors, the ego driven by the toy stack, and an
//! accident check after every step.

pub mod motion;
pub mod visibility;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ads::{Ads, Command, Route, WorldView, CHANNELS};
use crate::config::CyberConfiguration;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::record::{ChannelMessage, ExecutionRecord, RecordHeader};
use crate::scenario::{ActorKind, ActorState, PhysicalCondition};
use motion::Motion;

pub const WHEELBASE: f64 = 2.8;
/// Physical steering lock; control commands are fractions of it.
pub const STEER_LOCK_DEG: f64 = 30.0;
pub const EB_DECEL: f64 = 6.0;
pub const EB_WINDOW: f64 = 0.5;
/// Speed below which a deceleration does not count as emergency braking.
pub const EB_MIN_SPEED: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationParams {
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
}

impl Default for SimulationParams {
    fn default() -> Self {
        Self {
            dt: 0.05,
            horizon: 30.0,
            seed: 0,
        }
    }
}

impl SimulationParams {
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParams(format!("dt must be positive, got {}", self.dt)));
        }
        let n = self.horizon / self.dt;
        if !(self.horizon > 0.0) || (n - n.round()).abs() > 1e-6 {
            return Err(Error::InvalidParams(format!(
                "horizon {} is not a positive multiple of dt {}",
                self.horizon, self.dt
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccidentKind {
    None,
    Collision,
    EmergencyBraking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccidentVerdict {
    pub kind: AccidentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[serde(default)]
    pub participants: Vec<String>,
}

impl AccidentVerdict {
    pub fn none() -> Self {
        Self {
            kind: AccidentKind::None,
            time: None,
            participants: Vec::new(),
        }
    }

    pub fn is_accident(&self) -> bool {
        self.kind != AccidentKind::None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
}

pub type Trajectory = Vec<Sample>;

/// Trajectories keyed by actor id.
pub type Trajectories = BTreeMap<String, Trajectory>;

/// Separating-axis overlap of two actor boxes.
pub fn detect_collision(a: &ActorState, b: &ActorState) -> bool {
    a.obb().overlaps(&b.obb())
}

/// First time the average deceleration over `window` exceeds `threshold` while the
/// speed at the window start is above walking pace.
pub fn detect_emergency_brake(traj: &[Sample], threshold: f64, window: f64) -> Option<f64> {
    let dt = match traj {
        [a, b, ..] => b.t - a.t,
        _ => return None,
    };
    let w = (window / dt).round().max(1.0) as usize;
    (w..traj.len()).find_map(|k| eb_at(traj, k, w, threshold))
}

fn eb_at(traj: &[Sample], k: usize, w: usize, threshold: f64) -> Option<f64> {
    let prior = traj[k - w].speed;
    let window = traj[k].t - traj[k - w].t;
    (prior > EB_MIN_SPEED && (prior - traj[k].speed) / window > threshold).then_some(traj[k].t)
}

/// Result of one execution.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub trajectories: Trajectories,
    pub verdict: AccidentVerdict,
}

/// Runs the world and captures every channel message.
pub fn run_execution(
    cfg: &CyberConfiguration,
    p: &PhysicalCondition,
    params: &SimulationParams,
) -> Result<(Trajectories, AccidentVerdict, ExecutionRecord)> {
    let mut channels: BTreeMap<String, Vec<ChannelMessage>> =
        CHANNELS.iter().map(|c| (c.to_string(), Vec::new())).collect();
    let outcome = simulate(cfg, p, params, Some(&mut channels))?;
    let record = ExecutionRecord {
        header: RecordHeader::new("", params, cfg, p),
        channels,
        trajectories: outcome.trajectories.clone(),
        verdict: outcome.verdict.clone(),
    };
    Ok((outcome.trajectories, outcome.verdict, record))
}

/// Runs the world without capturing messages; what the search engine calls.
pub fn run_outcome(
    cfg: &CyberConfiguration,
    p: &PhysicalCondition,
    params: &SimulationParams,
) -> Result<Outcome> {
    simulate(cfg, p, params, None)
}

fn simulate(
    cfg: &CyberConfiguration,
    p: &PhysicalCondition,
    params: &SimulationParams,
    mut capture: Option<&mut BTreeMap<String, Vec<ChannelMessage>>>,
) -> Result<Outcome> {
    params.validate()?;
    p.ensure_valid()?;
    cfg.validate()?;
    let ego0 = p
        .ego()
        .ok_or_else(|| Error::InvalidScenario("no ego actor".into()))?
        .clone();
    let route = Route {
        origin: ego0.position,
        heading: ego0.heading,
        lane_half_width: p.map.lane_half_width,
        speed_limit: p.map.speed_limit,
    };
    let mut ads = Ads::new(cfg, route, ego0.extent);
    let wet = p.weather.is_wet();

    let mut others: Vec<ActorState> = p.actors.iter().filter(|a| a.kind != ActorKind::Ego).cloned().collect();
    let motions: Vec<Motion> = others
        .iter()
        .map(|a| Motion::for_actor(a, p.actor_scripts.get(&a.id).map(Vec::as_slice)))
        .collect();
    let solid: Vec<_> = p
        .map_entities
        .iter()
        .filter(|m| m.enabled && m.kind.is_solid())
        .collect();

    let mut ego = ego0;
    let mut trajectories: Trajectories = p.actors.iter().map(|a| (a.id.clone(), Vec::new())).collect();
    let eb_steps = (EB_WINDOW / params.dt).round().max(1.0) as usize;
    let n = params.steps();
    let mut verdict = AccidentVerdict::none();

    for k in 0..=n {
        let t = k as f64 * params.dt;
        for (a, m) in others.iter_mut().zip(&motions) {
            let pose = m.pose_at(t, wet);
            a.position = pose.position;
            a.heading = pose.heading;
            a.speed = pose.speed;
        }
        for a in std::iter::once(&ego).chain(others.iter()) {
            trajectories.get_mut(&a.id).expect("cast is fixed").push(Sample {
                t,
                position: a.position,
                heading: a.heading,
                speed: a.speed,
            });
        }

        if k >= 1 {
            if let Some(participants) = collisions(&ego, &others, &solid) {
                verdict = AccidentVerdict {
                    kind: AccidentKind::Collision,
                    time: Some(t),
                    participants,
                };
                break;
            }
            let ego_traj = &trajectories[&ego.id];
            if k >= eb_steps && eb_at(ego_traj, k, eb_steps, EB_DECEL).is_some() {
                verdict = AccidentVerdict {
                    kind: AccidentKind::EmergencyBraking,
                    time: Some(t),
                    participants: vec![ego.id.clone()],
                };
                break;
            }
        }
        if k == n {
            break;
        }

        let out = ads.tick(&WorldView {
            ego: &ego,
            others: &others,
            map_entities: &p.map_entities,
            weather: &p.weather,
        });
        if let Some(ch) = capture.as_deref_mut() {
            for (name, tree) in out.trees() {
                ch.get_mut(name).expect("known channel").push(ChannelMessage {
                    seq: k as u64,
                    t,
                    tree,
                });
            }
        }
        integrate(&mut ego, out.command(), params.dt);
    }

    Ok(Outcome {
        trajectories,
        verdict,
    })
}

/// Explicit kinematic bicycle step.
pub fn integrate(ego: &mut ActorState, cmd: Command, dt: f64) {
    let accel = control_accel(cmd);
    let v = (ego.speed + accel * dt).max(0.0);
    let yaw_rate = v / WHEELBASE * (cmd.steer * STEER_LOCK_DEG.to_radians()).tan();
    let heading = crate::geometry::wrap_angle(ego.heading + yaw_rate * dt);
    ego.position = ego.position + Vec2::from_angle(heading) * (v * dt);
    ego.heading = heading;
    ego.speed = v;
}

fn control_accel(cmd: Command) -> f64 {
    crate::ads::control::MAX_ACCEL * cmd.throttle - crate::ads::control::MAX_DECEL * cmd.brake
}

/// Sorted participants of the first collision found, if any.
fn collisions(
    ego: &ActorState,
    others: &[ActorState],
    solid: &[&crate::scenario::MapEntityState],
) -> Option<Vec<String>> {
    let actors: Vec<&ActorState> = std::iter::once(ego).chain(others.iter()).collect();
    for i in 0..actors.len() {
        for j in i + 1..actors.len() {
            if detect_collision(actors[i], actors[j]) {
                let mut ids = vec![actors[i].id.clone(), actors[j].id.clone()];
                ids.sort();
                return Some(ids);
            }
        }
    }
    let ego_box = ego.obb();
    for m in solid {
        if ego_box.overlaps(&m.obb()) {
            let mut ids = vec![ego.id.clone(), m.id.clone()];
            ids.sort();
            return Some(ids);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Color, RoadMap, WeatherState};

    fn ego(speed: f64) -> ActorState {
        ActorState {
            id: "ego".into(),
            kind: ActorKind::Ego,
            color: Color::Blue,
            position: Vec2::ZERO,
            heading: 0.0,
            speed,
            extent: ActorKind::Ego.default_extent(),
        }
    }

    fn alone(speed: f64) -> PhysicalCondition {
        PhysicalCondition {
            map: RoadMap {
                speed_limit: speed,
                ..RoadMap::default()
            },
            actors: vec![ego(speed)],
            map_entities: vec![],
            weather: WeatherState::default(),
            actor_scripts: BTreeMap::new(),
        }
    }

    fn sample(t: f64, speed: f64) -> Sample {
        Sample {
            t,
            position: Vec2::ZERO,
            heading: 0.0,
            speed,
        }
    }

    #[test]
    fn constant_speed_displacement() {
        let params = SimulationParams {
            dt: 0.05,
            horizon: 5.0,
            seed: 0,
        };
        let out = run_outcome(&CyberConfiguration::default(), &alone(2.0), &params).unwrap();
        let traj = &out.trajectories["ego"];
        assert_eq!(traj.len(), 101);
        let last = traj.last().unwrap();
        assert!((last.position.x - 10.0).abs() < 1e-9);
        assert_eq!(last.position.y, 0.0);
        assert_eq!(out.verdict.kind, AccidentKind::None);
    }

    #[test]
    fn identical_boxes_collide() {
        assert!(detect_collision(&ego(0.0), &ego(0.0)));
        let mut far = ego(0.0);
        far.position = Vec2::new(100.0, 0.0);
        assert!(!detect_collision(&ego(0.0), &far));
    }

    #[test]
    fn emergency_brake_thresholds() {
        let dt = 0.05;
        let constant: Vec<_> = (0..40).map(|k| sample(k as f64 * dt, 10.0)).collect();
        assert_eq!(detect_emergency_brake(&constant, EB_DECEL, EB_WINDOW), None);

        // 10 -> 0 between two samples: 20 m/s^2 over the window.
        let hard: Vec<_> = (0..40)
            .map(|k| sample(k as f64 * dt, if k <= 20 { 10.0 } else { 0.0 }))
            .collect();
        let t = detect_emergency_brake(&hard, EB_DECEL, EB_WINDOW).unwrap();
        assert!((t - 21.0 * dt).abs() < 1e-12, "{t}");

        let gentle: Vec<_> = (0..200)
            .map(|k| sample(k as f64 * dt, (10.0 - 2.0 * k as f64 * dt).max(0.0)))
            .collect();
        assert_eq!(detect_emergency_brake(&gentle, EB_DECEL, EB_WINDOW), None);
    }

    #[test]
    fn rejects_bad_params() {
        let bad = SimulationParams {
            dt: 0.05,
            horizon: 1.01,
            seed: 0,
        };
        assert!(run_outcome(&CyberConfiguration::default(), &alone(2.0), &bad).is_err());
    }

    #[test]
    fn runs_are_deterministic() {
        let p = crate::scenario::tests::sample_condition();
        let params = SimulationParams {
            horizon: 8.0,
            ..SimulationParams::default()
        };
        let a = run_execution(&CyberConfiguration::default(), &p, &params).unwrap();
        let b = run_execution(&CyberConfiguration::default(), &p, &params).unwrap();
        assert_eq!(a, b);
    }
}
