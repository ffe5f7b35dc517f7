//! Rebuilding scenarios from records and comparing executions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ChannelMessage, ExecutionRecord};
use crate::ads::message::{BrakeMsg, ChassisMsg, PerceptionMsg};
use crate::ads::{Ads, Route, CH_BRAKE, CH_CHASSIS, CH_CONTROL, CH_OBSTACLES, CH_PLANNING, CH_PREDICTION};
use crate::error::{Error, Result};
use crate::scenario::{ActorKind, PhysicalCondition, Waypoint};
use crate::sim::Trajectories;

pub const DEFAULT_EPSILON: f64 = 5.0;
pub const DEFAULT_DELTA: f64 = 3.0;

/// Window and tolerance of the similarity constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentParams {
    /// Accident time of the original execution.
    pub d: f64,
    /// Pre-accident exclusion window.
    pub delta: f64,
    pub epsilon: f64,
}

impl AlignmentParams {
    pub fn new(d: f64) -> Self {
        Self {
            d,
            delta: DEFAULT_DELTA,
            epsilon: DEFAULT_EPSILON,
        }
    }

    /// Right end of the comparison window, never negative.
    pub fn window_end(&self) -> f64 {
        (self.d - self.delta).max(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta < self.d) || !(self.epsilon > 0.0) {
            return Err(Error::InvalidParams(format!(
                "alignment needs delta < d and epsilon > 0 (d={}, delta={}, epsilon={})",
                self.d, self.delta, self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActorSelection {
    All,
    EgoOnly,
}

/// Scenario whose non-ego actors follow their recorded trajectories.
pub fn reconstruct_scenario(record: &ExecutionRecord) -> Result<PhysicalCondition> {
    let scene = &record.header.scene;
    if record.trajectories.is_empty() {
        return Err(Error::RecordFormat("record has no trajectories".into()));
    }
    let mut out = scene.clone();
    out.actor_scripts = BTreeMap::new();
    for a in &mut out.actors {
        let traj = record
            .trajectories
            .get(&a.id)
            .filter(|t| !t.is_empty())
            .ok_or_else(|| Error::MissingTrajectory(a.id.clone()))?;
        let first = traj[0];
        a.position = first.position;
        a.heading = first.heading;
        a.speed = first.speed;
        if a.kind == ActorKind::Ego {
            continue;
        }
        let script = traj
            .iter()
            .map(|s| Waypoint {
                t: s.t,
                position: s.position,
                heading: s.heading,
                speed: s.speed,
                drift: 0.0,
            })
            .collect();
        out.actor_scripts.insert(a.id.clone(), script);
    }
    Ok(out)
}

/// Mean over the window [0, d − δ] of the summed positional distance of the selected
/// actors. Both executions are aligned by their own start.
pub fn trajectory_deviation(
    a: &Trajectories,
    b: &Trajectories,
    selection: ActorSelection,
    align: &AlignmentParams,
    dt: f64,
) -> Result<f64> {
    let end = align.window_end();
    let n = (end / dt + 1e-9).floor() as usize + 1;
    let ids: Vec<&String> = match selection {
        ActorSelection::All => a.keys().collect(),
        ActorSelection::EgoOnly => a.keys().filter(|k| k.as_str() == "ego").collect(),
    };
    if ids.is_empty() {
        return Err(Error::MissingTrajectory("ego".into()));
    }
    let mut total = 0.0;
    for id in ids {
        let ta = &a[id];
        let tb = b.get(id).ok_or_else(|| Error::MissingTrajectory(id.clone()))?;
        for (name, t) in [("a", ta), ("b", tb)] {
            if t.len() < n {
                return Err(Error::WindowExceedsRecord {
                    window: end,
                    record: name.into(),
                    end: t.last().map_or(0.0, |s| s.t),
                });
            }
        }
        total += (0..n).map(|k| ta[k].position.distance(tb[k].position)).sum::<f64>();
    }
    Ok(total / n as f64)
}

pub fn record_deviation(
    a: &ExecutionRecord,
    b: &ExecutionRecord,
    selection: ActorSelection,
    align: &AlignmentParams,
) -> Result<f64> {
    trajectory_deviation(&a.trajectories, &b.trajectories, selection, align, a.header.dt)
}

/// Feeds the recorded chassis and perception messages through the downstream modules
/// and returns the regenerated prediction, planning and control channels.
pub fn replay_bus(record: &ExecutionRecord) -> Result<BTreeMap<String, Vec<ChannelMessage>>> {
    let scene = &record.header.scene;
    let ego = scene
        .ego()
        .ok_or_else(|| Error::InvalidScenario("no ego actor".into()))?;
    let route = Route {
        origin: ego.position,
        heading: ego.heading,
        lane_half_width: scene.map.lane_half_width,
        speed_limit: scene.map.speed_limit,
    };
    let mut ads = Ads::new(&record.header.config, route, ego.extent);
    let channel = |name: &str| {
        record
            .channels
            .get(name)
            .ok_or_else(|| Error::MissingChannel(name.into()))
    };
    let (chassis, obstacles, brake) = (channel(CH_CHASSIS)?, channel(CH_OBSTACLES)?, channel(CH_BRAKE)?);
    let parse = |what: &str, e: crate::ads::message::ParseError| Error::RecordFormat(format!("{what}: {e}"));

    let mut out: BTreeMap<String, Vec<ChannelMessage>> = [CH_PREDICTION, CH_PLANNING, CH_CONTROL]
        .iter()
        .map(|c| (c.to_string(), Vec::new()))
        .collect();
    for ((c, o), b) in chassis.iter().zip(obstacles).zip(brake) {
        let cm = ChassisMsg::from_tree(&c.tree).map_err(|e| parse(CH_CHASSIS, e))?;
        let om = PerceptionMsg::from_tree(&o.tree).map_err(|e| parse(CH_OBSTACLES, e))?;
        let bm = BrakeMsg::from_tree(&b.tree).map_err(|e| parse(CH_BRAKE, e))?;
        let (pred, plan, ctrl) = ads.downstream(&cm, &om, &bm);
        for (name, tree) in [
            (CH_PREDICTION, pred.to_tree()),
            (CH_PLANNING, plan.to_tree()),
            (CH_CONTROL, ctrl.to_tree()),
        ] {
            out.get_mut(name).expect("listed").push(ChannelMessage {
                seq: c.seq,
                t: c.t,
                tree,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CyberConfiguration;
    use crate::geometry::Vec2;
    use crate::scenario::tests::sample_condition;
    use crate::sim::{run_execution, Sample, SimulationParams};

    fn record() -> ExecutionRecord {
        let params = SimulationParams {
            horizon: 6.0,
            ..SimulationParams::default()
        };
        run_execution(&CyberConfiguration::default(), &sample_condition(), &params)
            .unwrap()
            .2
    }

    fn straight(offset: f64) -> Trajectories {
        let traj = (0..=100)
            .map(|k| Sample {
                t: k as f64 * 0.05,
                position: Vec2::new(k as f64 * 0.4, offset),
                heading: 0.0,
                speed: 8.0,
            })
            .collect();
        [("ego".to_string(), traj)].into_iter().collect()
    }

    #[test]
    fn reconstruct_replays_identically() {
        let r = record();
        let p = reconstruct_scenario(&r).unwrap();
        let (traj, verdict, r2) = run_execution(&r.header.config, &p, &r.header.params()).unwrap();
        assert_eq!(verdict, r.verdict);
        assert_eq!(traj["ego"], r.trajectories["ego"]);
        assert_eq!(r2.trajectories, r.trajectories);
    }

    #[test]
    fn empty_record_rejected() {
        let mut r = record();
        r.trajectories.clear();
        assert!(reconstruct_scenario(&r).is_err());
    }

    #[test]
    fn constant_lateral_shift() {
        let align = AlignmentParams::new(5.0);
        let a = straight(0.0);
        let b = straight(1.0);
        let d = trajectory_deviation(&a, &b, ActorSelection::EgoOnly, &align, 0.05).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        assert_eq!(trajectory_deviation(&a, &a, ActorSelection::All, &align, 0.05).unwrap(), 0.0);
        let long = AlignmentParams::new(20.0);
        assert!(matches!(
            trajectory_deviation(&a, &b, ActorSelection::All, &long, 0.05),
            Err(Error::WindowExceedsRecord { .. })
        ));
    }

    #[test]
    fn bus_replay_regenerates_downstream() {
        let r = record();
        let regenerated = replay_bus(&r).unwrap();
        for (name, msgs) in regenerated {
            assert_eq!(msgs, r.channels[&name], "channel {name}");
        }
    }
}
