//! Environment mutation: which entity, when perturbed minimally, makes the accident go away.

use serde::{Deserialize, Serialize};

use crate::config::CyberConfiguration;
use crate::error::{Error, Result};
use crate::geometry::{angle_diff, Vec2};
use crate::record::replay::{record_deviation, ActorSelection, AlignmentParams};
use crate::record::ExecutionRecord;
use crate::scenario::{
    apply_delta, entity_of, physical_scale, ActorKind, Color, Delta, DeltaKind, LightPolicy,
    MapEntityKind, PhysicalCondition, Value, POSITION_SPAN, SPEED_SPAN, WEATHER_FIELDS,
};
use crate::search::{nsga2, Evaluation, Gene, Genome, MopSettings, Problem, SearchSpace};
use crate::sim::{run_execution, run_outcome, SimulationParams, Trajectories};

/// Distance scale of the suspiciousness term, meters.
pub const F1_K: f64 = 10.0;
/// Distances are floored here before dividing.
pub const F1_MIN_DIST: f64 = 1.0;

/// Ego pose the suspiciousness term is measured from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoPose {
    pub position: Vec2,
    pub heading: f64,
}

/// Sample of `traj` at time `t` (nearest step, clamped to the record).
fn sample_at(traj: &[crate::sim::Sample], t: f64, dt: f64) -> Option<&crate::sim::Sample> {
    let k = (t / dt).round().max(0.0) as usize;
    traj.get(k.min(traj.len().saturating_sub(1)))
}

/// One term per mutated entity: K / dist + cos(bearing), negated and summed. Actor
/// positions come from the original trajectories at the accident time, map entities
/// from the mutated condition. Weather is not located and contributes nothing.
pub fn f1_suspiciousness(
    delta: &Delta,
    p: &PhysicalCondition,
    original: &Trajectories,
    ego: EgoPose,
    d: f64,
    dt: f64,
) -> f64 {
    let mut total = 0.0;
    for id in delta.entities() {
        let pos = if let Some(s) = original.get(&id).and_then(|t| sample_at(t, d, dt)) {
            s.position
        } else if let Some(m) = p.map_entity(&id) {
            m.position
        } else if let Some(a) = p.actor(&id) {
            a.position
        } else {
            continue;
        };
        total += entity_term(ego, pos);
    }
    -total
}

fn entity_term(ego: EgoPose, pos: Vec2) -> f64 {
    let rel = pos - ego.position;
    let dist = rel.norm().max(F1_MIN_DIST);
    let theta = if rel.norm() > 0.0 {
        angle_diff(rel.angle(), ego.heading)
    } else {
        0.0
    };
    F1_K / dist + theta.cos()
}

/// Mean squared positional distance over the common prefix of two trajectories.
pub fn trajectory_mse(a: &[crate::sim::Sample], b: &[crate::sim::Sample]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    a.iter()
        .zip(b)
        .take(n)
        .map(|(x, y)| (x.position - y.position).norm_sq())
        .sum::<f64>()
        / n as f64
}

/// Sum of per-actor MSE against the original execution.
pub fn f2_dissimilarity(original: &Trajectories, mutated: &Trajectories) -> f64 {
    original
        .iter()
        .filter_map(|(id, a)| mutated.get(id).map(|b| trajectory_mse(a, b)))
        .sum()
}

pub fn f3_cost(delta: &Delta) -> f64 {
    delta.magnitude_scaled(physical_scale)
}

/// Constraint violation: how early the accident happens. Zero when accident-free.
pub fn violation(params: &SimulationParams, time: Option<f64>) -> f64 {
    time.map_or(0.0, |t| (params.horizon - t).max(f64::MIN_POSITIVE))
}

/// Mutable properties of every non-ego entity and the weather.
pub fn physical_space(p0: &PhysicalCondition) -> SearchSpace {
    let mut genes = Vec::new();
    let labels = |xs: &[&str]| xs.iter().map(|s| Value::Label((*s).into())).collect::<Vec<_>>();
    for a in p0.actors.iter().filter(|a| a.kind != ActorKind::Ego) {
        let base = |prop: &str| format!("actors.{}.{prop}", a.id);
        if a.kind.is_vehicle() {
            genes.push(Gene::choice(
                base("kind"),
                Value::Label(a.kind.label().into()),
                labels(&["sedan", "truck"]),
            ));
        }
        genes.push(Gene::choice(
            base("color"),
            Value::Label(a.color.label().into()),
            labels(&Color::ALL.map(Color::label)),
        ));
        let Vec2 { x, y } = a.position;
        genes.push(Gene::real(base("x"), x, x - POSITION_SPAN, x + POSITION_SPAN));
        genes.push(Gene::real(base("y"), y, y - POSITION_SPAN, y + POSITION_SPAN));
        genes.push(Gene::angle(base("heading"), a.heading));
        genes.push(Gene::real(base("speed"), a.speed, 0.0, SPEED_SPAN.max(a.speed)));
    }
    for m in &p0.map_entities {
        let base = |prop: &str| format!("map_entities.{}.{prop}", m.id);
        match m.kind {
            MapEntityKind::TrafficCone | MapEntityKind::Box => {
                let Vec2 { x, y } = m.position;
                genes.push(Gene::real(base("x"), x, x - POSITION_SPAN, x + POSITION_SPAN));
                genes.push(Gene::real(base("y"), y, y - POSITION_SPAN, y + POSITION_SPAN));
                genes.push(Gene::angle(base("heading"), m.heading));
            }
            MapEntityKind::Building | MapEntityKind::Vegetation => {
                genes.push(Gene::flag(base("enabled"), m.enabled));
            }
            MapEntityKind::TrafficLight => {
                if let Some(policy) = m.light_policy {
                    genes.push(Gene::choice(
                        base("policy"),
                        Value::Label(policy.label().into()),
                        labels(&LightPolicy::ALL.map(LightPolicy::label)),
                    ));
                }
                genes.push(Gene::flag(base("enabled"), m.enabled));
            }
        }
    }
    for (field, lo, hi) in WEATHER_FIELDS {
        // Azimuth is half-open; keep mutated values strictly below 360.
        let hi = if field == "sun_azimuth" { hi - 1e-6 } else { hi };
        let base = p0.weather.get(field).unwrap_or(lo);
        genes.push(Gene::real(format!("weather.{field}"), base, lo, hi));
    }
    SearchSpace {
        kind: DeltaKind::Physical,
        genes,
    }
}

/// Everything the physical objectives need about the accident execution.
pub struct PhysicalProblem<'a> {
    pub cfg: &'a CyberConfiguration,
    pub p0: &'a PhysicalCondition,
    pub params: SimulationParams,
    pub original: &'a Trajectories,
    pub ego: EgoPose,
    pub d: f64,
    space: SearchSpace,
}

impl<'a> PhysicalProblem<'a> {
    pub fn new(record: &'a ExecutionRecord, p0: &'a PhysicalCondition, cfg: &'a CyberConfiguration) -> Result<Self> {
        let d = record
            .verdict
            .time
            .filter(|_| record.verdict.is_accident())
            .ok_or_else(|| Error::NoAccidentSignature("original execution is accident-free".into()))?;
        let params = record.header.params();
        let ego_traj = record
            .trajectories
            .get("ego")
            .ok_or_else(|| Error::MissingTrajectory("ego".into()))?;
        let s = sample_at(ego_traj, d, params.dt).ok_or_else(|| Error::MissingTrajectory("ego".into()))?;
        Ok(Self {
            cfg,
            p0,
            params,
            original: &record.trajectories,
            ego: EgoPose {
                position: s.position,
                heading: s.heading,
            },
            d,
            space: physical_space(p0),
        })
    }

    pub fn objectives(&self, delta: &Delta) -> Result<Evaluation> {
        let p = apply_delta(self.p0, delta)?;
        let out = run_outcome(self.cfg, &p, &self.params)?;
        Ok(Evaluation {
            objectives: vec![
                f1_suspiciousness(delta, &p, self.original, self.ego, self.d, self.params.dt),
                f2_dissimilarity(self.original, &out.trajectories),
                f3_cost(delta),
            ],
            violation: violation(&self.params, out.verdict.time.filter(|_| out.verdict.is_accident())),
        })
    }
}

impl Problem for PhysicalProblem<'_> {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&self, genome: &Genome) -> Evaluation {
        let delta = genome.to_delta(&self.space);
        // Conditions the simulator rejects count as the worst infeasible outcome.
        self.objectives(&delta).unwrap_or_else(|_| Evaluation {
            objectives: vec![0.0, f64::MAX, f64::MAX],
            violation: self.params.horizon,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontMember {
    pub delta: Delta,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalSearch {
    pub front: Vec<FrontMember>,
    pub evaluations: usize,
    pub feasible: usize,
}

/// Runs the constrained search; fails when nothing feasible was found.
pub fn nsga2_search(
    record: &ExecutionRecord,
    p0: &PhysicalCondition,
    cfg: &CyberConfiguration,
    settings: &MopSettings,
) -> Result<PhysicalSearch> {
    let problem = PhysicalProblem::new(record, p0, cfg)?;
    let r = nsga2(&problem, settings)?;
    let front = r
        .require_feasible()?
        .iter()
        .map(|i| FrontMember {
            delta: i.genome.to_delta(&problem.space),
            f1: i.eval.objectives[0],
            f2: i.eval.objectives[1],
            f3: i.eval.objectives[2],
        })
        .collect();
    Ok(PhysicalSearch {
        front,
        evaluations: r.evaluations,
        feasible: r.feasible,
    })
}

/// Selected trigger together with its accident-free reference execution.
#[derive(Debug, Clone)]
pub struct Trigger {
    pub member: FrontMember,
    pub entities: Vec<String>,
    /// All-actor deviation from the original on the alignment window.
    pub deviation: f64,
    pub reference: ExecutionRecord,
}

/// Front members in selection order: f3, then f1, then f2.
pub fn selection_order(front: &[FrontMember]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..front.len()).collect();
    idx.sort_by(|&a, &b| {
        let (x, y) = (&front[a], &front[b]);
        x.f3.total_cmp(&y.f3)
            .then(x.f1.total_cmp(&y.f1))
            .then(x.f2.total_cmp(&y.f2))
            .then(a.cmp(&b))
    });
    idx
}

/// Re-runs one member and checks it against the deviation bound.
pub fn verify_member(
    member: &FrontMember,
    record: &ExecutionRecord,
    p0: &PhysicalCondition,
    cfg: &CyberConfiguration,
    align: &AlignmentParams,
) -> Result<Trigger> {
    let p = apply_delta(p0, &member.delta)?;
    let (_, verdict, mut reference) = run_execution(cfg, &p, &record.header.params())?;
    if verdict.is_accident() {
        return Err(Error::SearchFailed(format!(
            "front member {} does not suppress the accident on re-run",
            describe(&member.delta)
        )));
    }
    reference.header.scenario_id = record.header.scenario_id.clone();
    let deviation = record_deviation(record, &reference, ActorSelection::All, align)?;
    let mut entities: Vec<String> = member.delta.entries.iter().map(|e| entity_of(&e.path)).collect();
    entities.dedup();
    Ok(Trigger {
        member: member.clone(),
        entities,
        deviation,
        reference,
    })
}

/// The cheapest front member whose execution stays within ε of the original.
pub fn select_trigger(
    front: &[FrontMember],
    record: &ExecutionRecord,
    p0: &PhysicalCondition,
    cfg: &CyberConfiguration,
    align: &AlignmentParams,
) -> Result<Trigger> {
    Ok(select_triggers(front, record, p0, cfg, align)?.remove(0))
}

/// Every admissible member, best first.
pub fn select_triggers(
    front: &[FrontMember],
    record: &ExecutionRecord,
    p0: &PhysicalCondition,
    cfg: &CyberConfiguration,
    align: &AlignmentParams,
) -> Result<Vec<Trigger>> {
    if front.is_empty() {
        return Err(Error::SearchFailed("empty front".into()));
    }
    let mut out = Vec::new();
    let mut rejected = Vec::new();
    for i in selection_order(front) {
        match verify_member(&front[i], record, p0, cfg, align) {
            Ok(t) if t.deviation < align.epsilon => out.push(t),
            Ok(t) => rejected.push(format!("{}: deviation {:.3}", describe(&t.member.delta), t.deviation)),
            Err(e) => rejected.push(format!("{}: {e}", describe(&front[i].delta))),
        }
    }
    if out.is_empty() {
        return Err(Error::SearchFailed(format!(
            "every front member violates the deviation bound (epsilon {}): {}",
            align.epsilon,
            rejected.join("; ")
        )));
    }
    Ok(out)
}

/// `path: old -> new, ...`
pub fn describe(delta: &Delta) -> String {
    delta
        .entries
        .iter()
        .map(|e| format!("{}: {} -> {}", e.path, e.old, e.new))
        .collect::<Vec<_>>()
        .join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::tests::sample_condition;
    use crate::sim::Sample;
    use std::collections::BTreeMap;

    fn pose() -> EgoPose {
        EgoPose {
            position: Vec2::ZERO,
            heading: 0.0,
        }
    }

    fn disable(id: &str, p: &str) -> Delta {
        let mut d = Delta::empty(DeltaKind::Physical);
        d.push(format!("map_entities.{id}.{p}"), Value::Bool(true), Value::Bool(false));
        d
    }

    #[test]
    fn f1_ahead_and_behind() {
        assert!((entity_term(pose(), Vec2::new(10.0, 0.0)) - 2.0).abs() < 1e-12);
        assert!(entity_term(pose(), Vec2::new(-10.0, 0.0)).abs() < 1e-12);
        // Floored distance.
        assert!((entity_term(pose(), Vec2::new(0.5, 0.0)) - 11.0).abs() < 1e-12);
    }

    #[test]
    fn f1_sums_entities_and_ignores_weather() {
        let mut p = sample_condition();
        p.map_entities[0].position = Vec2::new(10.0, 0.0);
        let none = BTreeMap::new();
        let d = disable("b1", "enabled");
        assert!((f1_suspiciousness(&d, &p, &none, pose(), 0.0, 0.05) + 2.0).abs() < 1e-12);
        let mut d2 = d.clone();
        d2.push("weather.fog_density", Value::Real(0.0), Value::Real(10.0));
        assert_eq!(
            f1_suspiciousness(&d2, &p, &none, pose(), 0.0, 0.05),
            f1_suspiciousness(&d, &p, &none, pose(), 0.0, 0.05)
        );
        let mut d3 = d.clone();
        d3.push("actors.lead.speed", Value::Real(0.98), Value::Real(1.0));
        let lead = p.actor("lead").unwrap().position;
        let expected = -(2.0 + entity_term(pose(), lead));
        assert!((f1_suspiciousness(&d3, &p, &none, pose(), 0.0, 0.05) - expected).abs() < 1e-12);
    }

    #[test]
    fn f2_constant_shift() {
        let traj = |dy: f64| -> Vec<Sample> {
            (0..10)
                .map(|k| Sample {
                    t: k as f64 * 0.1,
                    position: Vec2::new(k as f64, dy),
                    heading: 0.0,
                    speed: 1.0,
                })
                .collect()
        };
        let a: Trajectories = [("ego".to_string(), traj(0.0)), ("x".to_string(), traj(0.0))].into();
        let b: Trajectories = [("ego".to_string(), traj(0.0)), ("x".to_string(), traj(2.0))].into();
        assert_eq!(f2_dissimilarity(&a, &a), 0.0);
        assert!((f2_dissimilarity(&a, &b) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn space_covers_table() {
        let s = physical_space(&sample_condition());
        let paths: Vec<&str> = s.genes.iter().map(|g| g.path.as_str()).collect();
        for p in [
            "actors.lead.kind",
            "actors.lead.color",
            "actors.lead.speed",
            "map_entities.b1.enabled",
            "weather.sun_azimuth",
        ] {
            assert!(paths.contains(&p), "{p}");
        }
        assert!(!paths.iter().any(|p| p.starts_with("actors.ego")));
    }

    #[test]
    fn selection_prefers_low_cost() {
        let m = |f3: f64, f1: f64| FrontMember {
            delta: Delta::empty(DeltaKind::Physical),
            f1,
            f2: 0.0,
            f3,
        };
        assert_eq!(selection_order(&[m(4.0, -9.0), m(2.0, 0.0)]), vec![1, 0]);
        assert_eq!(selection_order(&[m(2.0, 0.0), m(2.0, -1.0)]), vec![1, 0]);
    }
}
