use std::path::Path;
use std::process::{Command, Output};

use rootcause::fixtures::fixture;
use rootcause::pipeline::{FIX_RECORD, MDR_CSV, ORIGINAL_RECORD, REFERENCE_RECORD, REPORT_JSON, REPORT_TEXT, STATS_CSV};
use rootcause::report::{RootCauseReport, Status};

fn rootcause(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rootcause"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("s3.jsonl");
    let o = rootcause(&["simulate", "s3", "--out", p(&rec)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("EmergencyBraking"));
    let o = rootcause(&["replay", p(&rec)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("reproduced"));
    // Flags that contradict the record are rejected.
    let o = rootcause(&["--dt", "0.1", "replay", p(&rec)]);
    assert_eq!(code(&o), 4);
}

#[test]
fn analyze_writes_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let o = rootcause(&["analyze", "s1", "--out", p(&run)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("deviating module: prediction"));
    assert!(text.contains("still_obstacle_speed_threshold"));
    for f in [ORIGINAL_RECORD, REFERENCE_RECORD, FIX_RECORD, REPORT_JSON, REPORT_TEXT, STATS_CSV, MDR_CSV] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let r = RootCauseReport::load(run.join(REPORT_JSON)).unwrap();
    assert_eq!(r.status, Status::Complete);
    assert_eq!(std::fs::read_to_string(run.join(REPORT_TEXT)).unwrap(), text);

    let o = rootcause(&["report", p(&run)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("cyber_mutation"));

    let csv = dir.path().join("mdr.csv");
    let o = rootcause(&[
        "diff",
        p(&run.join(ORIGINAL_RECORD)),
        p(&run.join(REFERENCE_RECORD)),
        "--csv",
        p(&csv),
    ]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("prediction"));
    assert!(csv.is_file());
}

#[test]
fn dry_weather_has_no_accident() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = fixture("s4").unwrap().scenario().unwrap();
    s.weather.precipitation = 0.0;
    let path = dir.path().join("s4_dry.json");
    std::fs::write(&path, serde_json::to_string_pretty(&s).unwrap()).unwrap();
    let run = dir.path().join("run");
    let o = rootcause(&["analyze", p(&path), "--out", p(&run)]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("no accident"));
    let r = RootCauseReport::load(run.join(REPORT_JSON)).unwrap();
    assert_eq!(r.status, Status::NoAccident);
    assert!(!run.join(REFERENCE_RECORD).exists());

    let rec = dir.path().join("dry.jsonl");
    assert_eq!(code(&rootcause(&["simulate", p(&path), "--out", p(&rec)])), 0);
    assert_eq!(code(&rootcause(&["physmut", p(&rec)])), 2);
}

#[test]
fn phase_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let o = rootcause(&["analyze", "s1", "--pop", "2", "--gen", "0", "--out", p(&run)]);
    assert_eq!(code(&o), 3);
    let r = RootCauseReport::load(run.join(REPORT_JSON)).unwrap();
    assert_eq!(r.status, Status::Failed);
    assert!(r.failed_phase.is_some());
}

#[test]
fn invalid_input_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&rootcause(&["analyze", p(&bad)])), 4);
    assert_eq!(code(&rootcause(&["analyze", p(&dir.path().join("missing.json"))])), 4);
    assert_eq!(code(&rootcause(&["simulate", "s1", "--horizon", "-1"])), 4);
    assert_eq!(code(&rootcause(&["analyze", "s1", "--pop", "3"])), 4);
    assert_eq!(code(&rootcause(&["cybermut", p(&bad)])), 4);
    assert_eq!(code(&rootcause(&["bogus"])), 4);
}
