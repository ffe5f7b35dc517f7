//! Motion of non-ego actors: scripted waypoint schedules or constant velocity.

use crate::geometry::{angle_diff, lerp_angle, wrap_angle, Vec2};
use crate::scenario::{ActorState, Waypoint};

/// Pose and speed of an actor at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Motion {
    Scripted(Vec<Waypoint>),
    Constant { start: Vec2, heading: f64, speed: f64 },
}

impl Motion {
    /// Builds the motion of `actor`. A script is authored relative to its first waypoint;
    /// when the actor's initial state differs from that anchor, the whole schedule is moved,
    /// rotated and time-scaled to start from the actor's state.
    pub fn for_actor(actor: &ActorState, script: Option<&[Waypoint]>) -> Self {
        match script {
            Some(wps) if !wps.is_empty() => Motion::Scripted(retarget(actor, wps)),
            _ => Motion::Constant {
                start: actor.position,
                heading: actor.heading,
                speed: actor.speed,
            },
        }
    }

    /// Pose at time `t`. Drift offsets apply only when `wet`.
    pub fn pose_at(&self, t: f64, wet: bool) -> Pose {
        match self {
            Motion::Constant {
                start,
                heading,
                speed,
            } => Pose {
                position: *start + Vec2::from_angle(*heading) * (speed * t),
                heading: *heading,
                speed: *speed,
            },
            Motion::Scripted(wps) => sample(wps, t, wet),
        }
    }
}

fn sample(wps: &[Waypoint], t: f64, wet: bool) -> Pose {
    let with_drift = |h: f64, drift: f64| if wet && drift != 0.0 { wrap_angle(h + drift) } else { h };
    let first = &wps[0];
    if t <= first.t {
        return Pose {
            position: first.position,
            heading: with_drift(first.heading, first.drift),
            speed: first.speed,
        };
    }
    let last = &wps[wps.len() - 1];
    if t >= last.t {
        return Pose {
            position: last.position,
            heading: with_drift(last.heading, last.drift),
            speed: last.speed,
        };
    }
    // Last waypoint with time <= t.
    let i = wps.partition_point(|w| w.t <= t) - 1;
    let (a, b) = (&wps[i], &wps[i + 1]);
    if t == a.t {
        return Pose {
            position: a.position,
            heading: with_drift(a.heading, a.drift),
            speed: a.speed,
        };
    }
    let u = (t - a.t) / (b.t - a.t);
    Pose {
        position: a.position.lerp(b.position, u),
        heading: with_drift(lerp_angle(a.heading, b.heading, u), a.drift + (b.drift - a.drift) * u),
        speed: a.speed + (b.speed - a.speed) * u,
    }
}

fn retarget(actor: &ActorState, wps: &[Waypoint]) -> Vec<Waypoint> {
    let anchor = wps[0];
    let same = anchor.position == actor.position
        && anchor.heading == actor.heading
        && anchor.speed == actor.speed;
    if same {
        return wps.to_vec();
    }
    let rot = angle_diff(actor.heading, anchor.heading);
    let ratio = if anchor.speed > 1e-9 {
        actor.speed / anchor.speed
    } else {
        1.0
    };
    if ratio <= 1e-9 {
        // A stopped actor stays at its initial pose.
        return vec![Waypoint {
            t: anchor.t,
            position: actor.position,
            heading: actor.heading,
            speed: 0.0,
            drift: anchor.drift,
        }];
    }
    wps.iter()
        .enumerate()
        .map(|(k, w)| {
            if k == 0 {
                return Waypoint {
                    t: w.t,
                    position: actor.position,
                    heading: actor.heading,
                    speed: actor.speed,
                    drift: w.drift,
                };
            }
            Waypoint {
                t: anchor.t + (w.t - anchor.t) / ratio,
                position: actor.position + (w.position - anchor.position).rotate(rot),
                heading: wrap_angle(w.heading + rot),
                speed: w.speed * ratio,
                drift: w.drift,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ActorKind, Color};

    fn wp(t: f64, x: f64, y: f64, speed: f64) -> Waypoint {
        Waypoint {
            t,
            position: Vec2::new(x, y),
            heading: 0.0,
            speed,
            drift: 0.0,
        }
    }

    fn actor(x: f64, speed: f64) -> ActorState {
        ActorState {
            id: "a".into(),
            kind: ActorKind::Sedan,
            color: Color::Red,
            position: Vec2::new(x, 0.0),
            heading: 0.0,
            speed,
            extent: ActorKind::Sedan.default_extent(),
        }
    }

    #[test]
    fn interpolates_and_clamps() {
        let script = [wp(0.0, 0.0, 0.0, 2.0), wp(5.0, 10.0, 0.0, 2.0)];
        let m = Motion::for_actor(&actor(0.0, 2.0), Some(&script));
        assert_eq!(m.pose_at(2.5, false).position, Vec2::new(5.0, 0.0));
        assert_eq!(m.pose_at(0.0, false).position, Vec2::ZERO);
        assert_eq!(m.pose_at(9.0, false).position, Vec2::new(10.0, 0.0));
        assert_eq!(m.pose_at(5.0, false).position, Vec2::new(10.0, 0.0));
    }

    #[test]
    fn faster_actor_runs_schedule_sooner() {
        let script = [wp(0.0, 0.0, 0.0, 2.0), wp(5.0, 10.0, 0.0, 2.0)];
        let m = Motion::for_actor(&actor(1.0, 4.0), Some(&script));
        let p = m.pose_at(2.5, false);
        assert!((p.position.x - 11.0).abs() < 1e-12);
        assert_eq!(p.speed, 4.0);
    }

    #[test]
    fn drift_only_when_wet() {
        let mut a = wp(0.0, 0.0, 0.0, 1.0);
        a.drift = 0.5;
        let mut b = wp(4.0, 4.0, 0.0, 1.0);
        b.drift = 0.5;
        let m = Motion::for_actor(&actor(0.0, 1.0), Some(&[a, b]));
        assert_eq!(m.pose_at(1.0, false).heading, 0.0);
        assert!((m.pose_at(1.0, true).heading - 0.5).abs() < 1e-12);
        assert_eq!(m.pose_at(1.0, true).position, m.pose_at(1.0, false).position);
    }

    #[test]
    fn constant_velocity() {
        let m = Motion::for_actor(&actor(0.0, 3.0), None);
        assert_eq!(m.pose_at(2.0, false).position, Vec2::new(6.0, 0.0));
    }
}
