//! Configuration mutation: the smallest parameter change, inside the deviating module,
//! that suppresses the accident without changing what the ego did beforehand.

use serde::{Deserialize, Serialize};

use crate::ads;
use crate::config::{cyber_scale, CyberConfiguration, ParamKind, ParameterSpec};
use crate::error::{Error, Result};
use crate::physical::{describe, trajectory_mse, violation};
use crate::record::replay::{trajectory_deviation, ActorSelection, AlignmentParams};
use crate::record::ExecutionRecord;
use crate::scenario::{apply_delta, Delta, DeltaKind, PhysicalCondition, Value};
use crate::search::{nsga2, Evaluation, Gene, Genome, MopSettings, Problem, SearchSpace};
use crate::sim::{run_execution, run_outcome, SimulationParams, Trajectories};

/// Which parameters the search may touch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Module(String),
    AllModules,
}

impl Scope {
    pub fn specs(&self) -> Vec<&'static ParameterSpec> {
        match self {
            Scope::Module(m) => ads::module_specs(m),
            Scope::AllModules => ads::parameter_specs().iter().collect(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Scope::Module(m) => m.clone(),
            Scope::AllModules => "all".into(),
        }
    }
}

pub fn cyber_space(c0: &CyberConfiguration, scope: &Scope) -> Result<SearchSpace> {
    let specs = scope.specs();
    if specs.is_empty() {
        return Err(Error::InvalidParams(format!("scope `{}` has no parameters", scope.label())));
    }
    let genes = specs
        .into_iter()
        .map(|s| {
            let key = s.key();
            let base = c0.get(&key).cloned().unwrap_or_else(|| s.default.clone());
            match &s.kind {
                ParamKind::Real { lo, hi } => Gene::real(key, base.as_real().unwrap_or(*lo), *lo, *hi),
                ParamKind::Boolean => Gene::flag(key, base.as_bool().unwrap_or(false)),
                ParamKind::Enum { values } => Gene::choice(
                    key,
                    base,
                    values.iter().map(|v| Value::Label(v.clone())).collect(),
                ),
            }
        })
        .collect();
    Ok(SearchSpace {
        kind: DeltaKind::Cyber,
        genes,
    })
}

/// Ego-only MSE against the original execution.
pub fn h1_ego_dissimilarity(original: &Trajectories, mutated: &Trajectories) -> f64 {
    match (original.get("ego"), mutated.get("ego")) {
        (Some(a), Some(b)) => trajectory_mse(a, b),
        _ => f64::INFINITY,
    }
}

pub fn h2_cost(delta: &Delta) -> f64 {
    delta.magnitude_scaled(cyber_scale)
}

pub struct CyberProblem<'a> {
    pub c0: &'a CyberConfiguration,
    pub p0: &'a PhysicalCondition,
    pub params: SimulationParams,
    pub original: &'a Trajectories,
    space: SearchSpace,
}

impl<'a> CyberProblem<'a> {
    pub fn new(record: &'a ExecutionRecord, p0: &'a PhysicalCondition, scope: &Scope) -> Result<Self> {
        if !record.verdict.is_accident() {
            return Err(Error::NoAccidentSignature("original execution is accident-free".into()));
        }
        let c0 = &record.header.config;
        Ok(Self {
            c0,
            p0,
            params: record.header.params(),
            original: &record.trajectories,
            space: cyber_space(c0, scope)?,
        })
    }

    pub fn objectives(&self, delta: &Delta) -> Result<Evaluation> {
        let c = apply_delta(self.c0, delta)?;
        let out = run_outcome(&c, self.p0, &self.params)?;
        Ok(Evaluation {
            objectives: vec![h1_ego_dissimilarity(self.original, &out.trajectories), h2_cost(delta)],
            violation: violation(&self.params, out.verdict.time.filter(|_| out.verdict.is_accident())),
        })
    }
}

impl Problem for CyberProblem<'_> {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&self, genome: &Genome) -> Evaluation {
        let delta = genome.to_delta(&self.space);
        self.objectives(&delta).unwrap_or_else(|_| Evaluation {
            objectives: vec![f64::MAX, f64::MAX],
            violation: self.params.horizon,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyberMember {
    pub delta: Delta,
    pub h1: f64,
    pub h2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyberSearch {
    pub scope: Scope,
    pub genome_len: usize,
    pub front: Vec<CyberMember>,
    pub evaluations: usize,
    pub feasible: usize,
}

pub fn cyber_search(
    record: &ExecutionRecord,
    p0: &PhysicalCondition,
    scope: &Scope,
    settings: &MopSettings,
) -> Result<CyberSearch> {
    let problem = CyberProblem::new(record, p0, scope)?;
    let r = nsga2(&problem, settings)?;
    let front = r
        .require_feasible()?
        .iter()
        .map(|i| CyberMember {
            delta: i.genome.to_delta(&problem.space),
            h1: i.eval.objectives[0],
            h2: i.eval.objectives[1],
        })
        .collect();
    Ok(CyberSearch {
        scope: scope.clone(),
        genome_len: problem.space.genes.len(),
        front,
        evaluations: r.evaluations,
        feasible: r.feasible,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterChange {
    pub name: String,
    pub original: Value,
    pub mutated: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Misconfiguration {
    pub changes: Vec<ParameterChange>,
    pub delta: Delta,
    pub h1: f64,
    pub h2: f64,
    /// Ego deviation on the alignment window.
    pub deviation: f64,
    /// Mean ego distance after the window, reported for review only.
    pub post_window_deviation: f64,
}

/// Verdict and ego deviation of one member, re-run from scratch.
pub fn check_member(
    member: &CyberMember,
    record: &ExecutionRecord,
    p0: &PhysicalCondition,
    align: &AlignmentParams,
) -> Result<(bool, f64, f64)> {
    let c = apply_delta(&record.header.config, &member.delta)?;
    let (traj, verdict, _) = run_execution(&c, p0, &record.header.params())?;
    let dt = record.header.dt;
    let dev = trajectory_deviation(&record.trajectories, &traj, ActorSelection::EgoOnly, align, dt)?;
    let post = post_window(&record.trajectories, &traj, align, dt);
    Ok((!verdict.is_accident(), dev, post))
}

fn post_window(a: &Trajectories, b: &Trajectories, align: &AlignmentParams, dt: f64) -> f64 {
    let (Some(a), Some(b)) = (a.get("ego"), b.get("ego")) else {
        return 0.0;
    };
    let start = (align.window_end() / dt + 1e-9).floor() as usize + 1;
    let n = a.len().min(b.len());
    if start >= n {
        return 0.0;
    }
    (start..n).map(|k| a[k].position.distance(b[k].position)).sum::<f64>() / (n - start) as f64
}

/// Behavior-preserving member with the smallest cost, re-verified to suppress the accident.
pub fn pinpoint_misconfiguration(
    front: &[CyberMember],
    record: &ExecutionRecord,
    p0: &PhysicalCondition,
    align: &AlignmentParams,
) -> Result<Misconfiguration> {
    if front.is_empty() {
        return Err(Error::SearchFailed("empty front".into()));
    }
    let mut order: Vec<usize> = (0..front.len()).collect();
    order.sort_by(|&a, &b| {
        front[a]
            .h2
            .total_cmp(&front[b].h2)
            .then(front[a].h1.total_cmp(&front[b].h1))
            .then(a.cmp(&b))
    });
    let mut rejected = Vec::new();
    for i in order {
        let m = &front[i];
        let (suppressed, deviation, post) = check_member(m, record, p0, align)?;
        if !suppressed {
            rejected.push(format!("{}: accident on re-run", describe(&m.delta)));
            continue;
        }
        if deviation >= align.epsilon {
            rejected.push(format!("{}: ego deviation {deviation:.3}", describe(&m.delta)));
            continue;
        }
        let changes = m
            .delta
            .entries
            .iter()
            .map(|e| ParameterChange {
                name: e.path.clone(),
                original: e.old.clone(),
                mutated: e.new.clone(),
            })
            .collect();
        return Ok(Misconfiguration {
            changes,
            delta: m.delta.clone(),
            h1: m.h1,
            h2: m.h2,
            deviation,
            post_window_deviation: post,
        });
    }
    Err(Error::SearchFailed(format!(
        "no front member preserves the pre-accident ego behavior (epsilon {}): {}",
        align.epsilon,
        rejected.join("; ")
    )))
}
