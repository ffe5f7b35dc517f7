//! Orchestration: replay, physical mutation, exec-diff, cyber mutation.

use std::path::Path;
use std::time::Instant;

use crate::ads::{self, extract_cmg};
use crate::cyber::{cyber_search, pinpoint_misconfiguration, Misconfiguration, Scope};
use crate::diff::{exec_diff, DiffReport, DEFAULT_REACTION};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::fixtures::ScenarioFile;
use crate::physical::{nsga2_search, select_triggers, Trigger};
use crate::record::replay::{reconstruct_scenario, AlignmentParams, DEFAULT_DELTA, DEFAULT_EPSILON};
use crate::record::ExecutionRecord;
use crate::report::{
    MisconfigReport, ModuleReport, Phase, PhaseTiming, PropertyChange, RecordPaths, RootCauseReport, ScopeReport,
    SearchStats, Status, TriggerReport, REPORT_VERSION,
};
use crate::scenario::apply_delta;
use crate::search::MopSettings;
use crate::sim::{run_execution, SimulationParams};

pub const ORIGINAL_RECORD: &str = "original.jsonl";
pub const REFERENCE_RECORD: &str = "reference.jsonl";
pub const FIX_RECORD: &str = "fix.jsonl";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const STATS_CSV: &str = "stats.csv";
pub const MDR_CSV: &str = "mdr.csv";

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub sim: SimulationParams,
    pub epsilon: f64,
    /// Pre-accident exclusion window of the alignment constraints.
    pub align_delta: f64,
    /// Reaction window of the module search.
    pub reaction: f64,
    pub penalty: Option<f64>,
    pub physical: MopSettings,
    pub cyber: MopSettings,
    /// Search every module's parameters instead of the deviating module's.
    pub all_modules: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            sim: SimulationParams::default(),
            epsilon: DEFAULT_EPSILON,
            align_delta: DEFAULT_DELTA,
            reaction: DEFAULT_REACTION,
            penalty: None,
            physical: MopSettings::default(),
            cyber: MopSettings::default(),
            all_modules: false,
        }
    }
}

impl PipelineOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sim.seed = seed;
        self.physical.seed = seed;
        self.cyber.seed = seed;
        self
    }

    pub fn with_executor(mut self, exec: Executor) -> Self {
        self.physical.executor = exec;
        self.cyber.executor = exec;
        self
    }

    pub fn alignment(&self, d: f64) -> AlignmentParams {
        AlignmentParams {
            d,
            delta: self.align_delta,
            epsilon: self.epsilon,
        }
    }
}

/// Everything a run produced; records that were never reached stay `None`.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: RootCauseReport,
    pub original: ExecutionRecord,
    pub reference: Option<ExecutionRecord>,
    pub fix: Option<ExecutionRecord>,
    pub diff: Option<DiffReport>,
}

impl PipelineRun {
    /// CLI exit code: 0 success, 2 no accident, 3 phase failure.
    pub fn exit_code(&self) -> i32 {
        match self.report.status {
            Status::Complete => 0,
            Status::NoAccident => 2,
            Status::Failed => 3,
        }
    }

    /// Writes records, report and plot data into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.original.save(dir.join(ORIGINAL_RECORD))?;
        if let Some(r) = &self.reference {
            r.save(dir.join(REFERENCE_RECORD))?;
        }
        if let Some(r) = &self.fix {
            r.save(dir.join(FIX_RECORD))?;
        }
        if let Some(d) = &self.diff {
            d.write_csv(std::io::BufWriter::new(std::fs::File::create(dir.join(MDR_CSV))?))?;
        }
        std::fs::write(dir.join(REPORT_JSON), self.report.to_json()?)?;
        std::fs::write(dir.join(REPORT_TEXT), self.report.render_text())?;
        self.report
            .write_stats_csv(std::io::BufWriter::new(std::fs::File::create(dir.join(STATS_CSV))?))?;
        Ok(())
    }
}

struct Clock(Vec<PhaseTiming>);

impl Clock {
    fn time<T>(&mut self, phase: Phase, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.0.push(PhaseTiming {
            phase,
            seconds: t0.elapsed().as_secs_f64(),
        });
        out
    }
}

/// Runs every phase in order and stops at the first failure with a partial report.
pub fn run_pipeline(scenario: &ScenarioFile, opts: &PipelineOptions) -> Result<PipelineRun> {
    let p0 = scenario.condition()?;
    let c0 = scenario.config()?;
    opts.sim.validate()?;
    opts.physical.validate()?;
    opts.cyber.validate()?;
    let mut clock = Clock(Vec::new());

    let replayed = clock.time(Phase::Replay, || -> Result<ExecutionRecord> {
        let (_, _, mut original) = run_execution(&c0, &p0, &opts.sim)?;
        original.header.scenario_id = scenario.id.clone();
        if original.verdict.is_accident() {
            // The accident must reproduce from the record alone.
            let rebuilt = reconstruct_scenario(&original)?;
            let (_, v, _) = run_execution(&original.header.config, &rebuilt, &original.header.params())?;
            if v.kind != original.verdict.kind || v.time != original.verdict.time {
                return Err(Error::RecordFormat(format!(
                    "replay gave {:?} at {:?}, the recording has {:?} at {:?}",
                    v.kind, v.time, original.verdict.kind, original.verdict.time
                )));
            }
        }
        Ok(original)
    })?;
    let original = replayed;

    let mut run = PipelineRun {
        report: RootCauseReport {
            version: REPORT_VERSION,
            scenario_id: scenario.id.clone(),
            status: Status::Complete,
            failed_phase: None,
            diagnostics: None,
            verdict: original.verdict.clone(),
            trigger: None,
            deviating_module: None,
            scope: None,
            misconfiguration: None,
            records: RecordPaths {
                original: Some(ORIGINAL_RECORD.into()),
                ..Default::default()
            },
            physical_search: None,
            cyber_search: None,
            timings: Vec::new(),
        },
        original: original.clone(),
        reference: None,
        fix: None,
        diff: None,
    };

    let d = match original.verdict.time {
        Some(d) if original.verdict.is_accident() => d,
        _ => {
            run.report.status = Status::NoAccident;
            run.report.diagnostics = Some("no accident signature in the original execution".into());
            run.report.timings = clock.0;
            return Ok(run);
        }
    };
    let align = opts.alignment(d);
    let fail = |run: &mut PipelineRun, phase: Phase, e: Error| {
        run.report.status = Status::Failed;
        run.report.failed_phase = Some(phase);
        run.report.diagnostics = Some(e.to_string());
    };
    if let Err(e) = align.validate() {
        fail(&mut run, Phase::PhysicalMutation, e);
        run.report.timings = clock.0;
        return Ok(run);
    }

    // Physical mutation: the front, then every admissible trigger, best first.
    let triggers = clock.time(Phase::PhysicalMutation, || -> Result<(SearchStats, Vec<Trigger>)> {
        let s = nsga2_search(&original, &p0, &c0, &opts.physical)?;
        let stats = SearchStats {
            evaluations: s.evaluations,
            feasible: s.feasible,
            front_size: s.front.len(),
        };
        Ok((stats, select_triggers(&s.front, &original, &p0, &c0, &align)?))
    });
    let triggers = match triggers {
        Ok((stats, t)) => {
            run.report.physical_search = Some(stats);
            t
        }
        Err(e) => {
            fail(&mut run, Phase::PhysicalMutation, e);
            run.report.timings = clock.0;
            return Ok(run);
        }
    };

    // Exec-diff against each trigger's reference until one pinpoints a module.
    let g = extract_cmg();
    let diffed = clock.time(Phase::ExecDiff, || -> Result<(usize, DiffReport)> {
        let mut first_failure = None;
        for (rank, t) in triggers.iter().enumerate() {
            let rep = exec_diff(&original, &t.reference, &g, opts.reaction, opts.penalty, opts.physical.executor)?;
            if rep.pinpoint.is_some() {
                return Ok((rank, rep));
            }
            first_failure.get_or_insert_with(|| rep.failure.clone().unwrap_or_default());
        }
        Err(Error::PinpointFailed(format!(
            "no reference among {} triggers localizes a module; first: {}",
            triggers.len(),
            first_failure.unwrap_or_default()
        )))
    });
    let (rank, diff) = match diffed {
        Ok(x) => x,
        Err(e) => {
            let t = &triggers[0];
            run.report.trigger = Some(trigger_report(t, 0));
            run.reference = Some(t.reference.clone());
            run.report.records.reference = Some(REFERENCE_RECORD.into());
            fail(&mut run, Phase::ExecDiff, e);
            run.report.timings = clock.0;
            return Ok(run);
        }
    };
    let trigger = &triggers[rank];
    run.report.trigger = Some(trigger_report(trigger, rank));
    run.reference = Some(trigger.reference.clone());
    run.report.records.reference = Some(REFERENCE_RECORD.into());
    let pin = diff.pinpoint.clone().expect("accepted diff has a pinpoint");
    run.report.deviating_module = Some(ModuleReport {
        module: pin.module.clone(),
        path: pin.path.clone(),
        channel_times: diff
            .changes
            .iter()
            .map(|c| (c.channel.clone(), c.first()))
            .collect(),
    });
    run.diff = Some(diff);

    // Cyber mutation within the deviating module.
    let scope = if opts.all_modules {
        Scope::AllModules
    } else {
        Scope::Module(pin.module.clone())
    };
    run.report.scope = Some(ScopeReport {
        label: scope.label(),
        scoped_parameters: scope.specs().len(),
        total_parameters: ads::parameter_specs().len(),
    });
    let found = clock.time(Phase::CyberMutation, || -> Result<(SearchStats, Misconfiguration, ExecutionRecord)> {
        let s = cyber_search(&original, &p0, &scope, &opts.cyber)?;
        let stats = SearchStats {
            evaluations: s.evaluations,
            feasible: s.feasible,
            front_size: s.front.len(),
        };
        let m = pinpoint_misconfiguration(&s.front, &original, &p0, &align)?;
        let cfg = apply_delta(&c0, &m.delta)?;
        let (_, _, mut fix) = run_execution(&cfg, &p0, &opts.sim)?;
        fix.header.scenario_id = scenario.id.clone();
        Ok((stats, m, fix))
    });
    match found {
        Ok((stats, m, fix)) => {
            run.report.cyber_search = Some(stats);
            run.report.misconfiguration = Some(MisconfigReport {
                changes: m.changes,
                h1: m.h1,
                h2: m.h2,
                deviation: m.deviation,
                post_window_deviation: m.post_window_deviation,
                fix_verdict: fix.verdict.clone(),
            });
            run.fix = Some(fix);
            run.report.records.fix = Some(FIX_RECORD.into());
        }
        Err(e) => fail(&mut run, Phase::CyberMutation, e),
    }
    run.report.timings = clock.0;
    Ok(run)
}

fn trigger_report(t: &Trigger, rank: usize) -> TriggerReport {
    TriggerReport {
        entities: t.entities.clone(),
        changes: t
            .member
            .delta
            .entries
            .iter()
            .map(|e| PropertyChange {
                path: e.path.clone(),
                original: e.old.clone(),
                mutated: e.new.clone(),
            })
            .collect(),
        f1: t.member.f1,
        f2: t.member.f2,
        f3: t.member.f3,
        deviation: t.deviation,
        rank,
    }
}
