use rootcause::exec::Executor;
use rootcause::fixtures::fixture;
use rootcause::pipeline::{run_pipeline, PipelineOptions, STATS_CSV};
use rootcause::report::{Phase, RootCauseReport, Status};
use rootcause::search::MopSettings;
use rootcause::Error;

fn quick() -> PipelineOptions {
    let s = MopSettings {
        population: 16,
        generations: 6,
        ..MopSettings::default()
    };
    PipelineOptions {
        physical: s.clone(),
        cyber: s,
        ..PipelineOptions::default()
    }
}

#[test]
fn executors_agree() {
    let s = fixture("s3").unwrap().scenario().unwrap();
    let a = run_pipeline(&s, &quick().with_executor(Executor::Sequential)).unwrap();
    let b = run_pipeline(&s, &quick().with_executor(Executor::Parallel)).unwrap();
    assert_eq!(a.report.without_timings().unwrap(), b.report.without_timings().unwrap());
    assert_eq!(a.fix, b.fix);
}

#[test]
fn report_round_trips_and_stats_add_up() {
    let s = fixture("s2").unwrap().scenario().unwrap();
    let run = run_pipeline(&s, &PipelineOptions::default()).unwrap();
    let r = &run.report;
    assert_eq!(r.status, Status::Complete);
    let phases: Vec<Phase> = r.timings.iter().map(|t| t.phase).collect();
    assert_eq!(phases, Phase::ALL.to_vec());
    let share: f64 = r.phase_shares().iter().map(|(_, _, s)| s).sum();
    assert!((share - 1.0).abs() < 1e-9);

    let dir = tempfile::tempdir().unwrap();
    run.write_to(dir.path()).unwrap();
    let back = RootCauseReport::load(dir.path().join("report.json")).unwrap();
    assert_eq!(back.to_json().unwrap(), r.to_json().unwrap());
    let csv = std::fs::read_to_string(dir.path().join(STATS_CSV)).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("phase,seconds,share"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    let sum: f64 = rows.iter().map(|r| r[2].parse::<f64>().unwrap()).sum();
    assert!((sum - 1.0).abs() < 1e-5);

    // Keys are sorted at every level.
    let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

#[test]
fn scope_is_reported() {
    let s = fixture("s4").unwrap().scenario().unwrap();
    let run = run_pipeline(&s, &PipelineOptions::default()).unwrap();
    let scope = run.report.scope.as_ref().unwrap();
    assert_eq!(scope.label, "planning");
    assert!(scope.scoped_parameters * 4 <= scope.total_parameters);
    let t = run.report.trigger.as_ref().unwrap();
    assert_eq!(t.entities, vec!["truck".to_string()]);
    let m = run.report.deviating_module.as_ref().unwrap();
    assert_eq!(m.path.first().map(String::as_str), Some("channel:control"));
}

#[test]
fn accident_free_scenario_stops_after_replay() {
    let mut s = fixture("s4").unwrap().scenario().unwrap();
    s.weather.precipitation = 0.0;
    let run = run_pipeline(&s, &PipelineOptions::default()).unwrap();
    assert_eq!(run.report.status, Status::NoAccident);
    assert_eq!(run.exit_code(), 2);
    assert!(run.reference.is_none() && run.fix.is_none());
    assert_eq!(run.report.timings.len(), 1);
}

#[test]
fn bad_options_are_rejected() {
    let s = fixture("s1").unwrap().scenario().unwrap();
    let mut o = PipelineOptions::default();
    o.physical.population = 7;
    assert!(matches!(run_pipeline(&s, &o), Err(Error::InvalidParams(_))));
    let mut o = PipelineOptions::default();
    o.sim.dt = 0.0;
    assert!(run_pipeline(&s, &o).is_err());
}

#[test]
fn tight_epsilon_fails_a_phase() {
    let s = fixture("s1").unwrap().scenario().unwrap();
    let o = PipelineOptions {
        epsilon: 1e-6,
        ..PipelineOptions::default()
    };
    let run = run_pipeline(&s, &o).unwrap();
    assert_eq!(run.report.status, Status::Failed);
    assert_eq!(run.exit_code(), 3);
    assert!(run.report.diagnostics.is_some());
}
