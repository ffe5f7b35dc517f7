use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rootcause::ads::extract_cmg;
use rootcause::cyber::{cyber_search, pinpoint_misconfiguration, Scope};
use rootcause::diff::{exec_diff, DEFAULT_REACTION};
use rootcause::fixtures::{fixture, ScenarioFile};
use rootcause::physical::{describe, nsga2_search, select_trigger};
use rootcause::pipeline::{run_pipeline, PipelineOptions};
use rootcause::record::replay::{reconstruct_scenario, AlignmentParams, DEFAULT_EPSILON};
use rootcause::record::ExecutionRecord;
use rootcause::report::RootCauseReport;
use rootcause::search::MopSettings;
use rootcause::sim::{run_execution, SimulationParams};
use rootcause::Error;

#[derive(Parser)]
#[command(name = "rootcause", version, about = "Root-cause analysis of simulated driving accidents")]
struct Cli {
    /// Simulation step in seconds.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Simulated duration in seconds.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Deviation bound of the similarity constraints.
    #[arg(long, global = true, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct SearchArgs {
    #[arg(long, default_value_t = 24)]
    pop: usize,
    #[arg(long = "gen", default_value_t = 25)]
    generations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Evaluate candidates on one thread.
    #[arg(long)]
    sequential: bool,
}

impl SearchArgs {
    fn settings(&self) -> MopSettings {
        MopSettings {
            population: self.pop,
            generations: self.generations,
            seed: self.seed,
            executor: if self.sequential {
                rootcause::exec::Executor::Sequential
            } else {
                rootcause::exec::Executor::Parallel
            },
            ..MopSettings::default()
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write its execution record.
    Simulate {
        /// Scenario file, or a library id (s1..s4).
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild a scenario from a record and check that it reproduces.
    Replay { record: PathBuf },
    /// Search environment changes that suppress the recorded accident.
    Physmut {
        record: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        /// Where to write the selected reference execution.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two records channel by channel and locate the deviating module.
    Diff {
        record_a: PathBuf,
        record_b: PathBuf,
        #[arg(long, default_value_t = DEFAULT_REACTION)]
        delta: f64,
        /// Write per-channel MDR series here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Search configuration changes that suppress the recorded accident.
    Cybermut {
        record: PathBuf,
        #[arg(long, required_unless_present = "all_modules")]
        module: Option<String>,
        #[arg(long, conflicts_with = "module")]
        all_modules: bool,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Full pipeline on a scenario; writes a run directory.
    Analyze {
        scenario: String,
        #[arg(long, default_value = "run")]
        out: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        /// Search all modules' parameters instead of the deviating module's.
        #[arg(long)]
        all_modules: bool,
    },
    /// Print a run directory's report and stats.
    Report { run_dir: PathBuf },
}

fn load_scenario(arg: &str) -> rootcause::Result<ScenarioFile> {
    if !Path::new(arg).is_file() {
        if let Some(f) = fixture(arg) {
            return f.scenario();
        }
    }
    ScenarioFile::load(arg)
}

fn sim_params(cli: &Cli, seed: u64) -> SimulationParams {
    let d = SimulationParams::default();
    SimulationParams {
        dt: cli.dt.unwrap_or(d.dt),
        horizon: cli.horizon.unwrap_or(d.horizon),
        seed,
    }
}

/// Records carry their own step and horizon; global flags may not contradict them.
fn check_record_params(cli: &Cli, r: &ExecutionRecord) -> rootcause::Result<()> {
    for (name, flag, rec) in [("dt", cli.dt, r.header.dt), ("horizon", cli.horizon, r.header.horizon)] {
        if let Some(v) = flag {
            if v != rec {
                return Err(Error::InvalidParams(format!("--{name} {v} differs from the record's {rec}")));
            }
        }
    }
    Ok(())
}

fn alignment(cli: &Cli, r: &ExecutionRecord) -> rootcause::Result<AlignmentParams> {
    let d = r
        .verdict
        .time
        .filter(|_| r.verdict.is_accident())
        .ok_or_else(|| Error::NoAccidentSignature("record is accident-free".into()))?;
    let a = AlignmentParams {
        epsilon: cli.epsilon,
        ..AlignmentParams::new(d)
    };
    a.validate()?;
    Ok(a)
}

fn run(cli: &Cli) -> rootcause::Result<i32> {
    match &cli.cmd {
        Cmd::Simulate { scenario, seed, out } => {
            let s = load_scenario(scenario)?;
            let (_, v, mut r) = run_execution(&s.config()?, &s.condition()?, &sim_params(cli, *seed))?;
            r.header.scenario_id = s.id.clone();
            println!("{}: {:?} at {:?} {:?}", s.id, v.kind, v.time, v.participants);
            if let Some(out) = out {
                r.save(out)?;
            }
            Ok(0)
        }
        Cmd::Replay { record } => {
            let r = ExecutionRecord::load(record)?;
            check_record_params(cli, &r)?;
            let p = reconstruct_scenario(&r)?;
            let (traj, v, _) = run_execution(&r.header.config, &p, &r.header.params())?;
            let same = v == r.verdict && traj.get("ego") == r.trajectories.get("ego");
            println!(
                "recorded {:?} at {:?}; replayed {:?} at {:?}; {}",
                r.verdict.kind,
                r.verdict.time,
                v.kind,
                v.time,
                if same { "reproduced" } else { "MISMATCH" }
            );
            Ok(if same { 0 } else { 3 })
        }
        Cmd::Physmut { record, search, out } => {
            let r = ExecutionRecord::load(record)?;
            check_record_params(cli, &r)?;
            let align = alignment(cli, &r)?;
            let p0 = &r.header.scene;
            let c0 = &r.header.config;
            let s = nsga2_search(&r, p0, c0, &search.settings())?;
            println!("{} evaluations, {} feasible, front of {}", s.evaluations, s.feasible, s.front.len());
            for m in &s.front {
                println!("  f1={:.4} f2={:.4} f3={:.4}  {}", m.f1, m.f2, m.f3, describe(&m.delta));
            }
            let t = select_trigger(&s.front, &r, p0, c0, &align)?;
            println!("trigger: {} (deviation {:.4})", describe(&t.member.delta), t.deviation);
            if let Some(out) = out {
                t.reference.save(out)?;
            }
            Ok(0)
        }
        Cmd::Diff {
            record_a,
            record_b,
            delta,
            csv,
        } => {
            let a = ExecutionRecord::load(record_a)?;
            let b = ExecutionRecord::load(record_b)?;
            let rep = exec_diff(&a, &b, &extract_cmg(), *delta, None, Default::default())?;
            print!("{}", rep.summary());
            if let Some(csv) = csv {
                rep.write_csv(std::io::BufWriter::new(std::fs::File::create(csv)?))?;
            }
            Ok(if rep.pinpoint.is_some() { 0 } else { 3 })
        }
        Cmd::Cybermut {
            record,
            module,
            all_modules,
            search,
        } => {
            let r = ExecutionRecord::load(record)?;
            check_record_params(cli, &r)?;
            let align = alignment(cli, &r)?;
            let scope = match (module, all_modules) {
                (_, true) => Scope::AllModules,
                (Some(m), false) => Scope::Module(m.clone()),
                (None, false) => return Err(Error::InvalidParams("need --module or --all-modules".into())),
            };
            let s = cyber_search(&r, &r.header.scene, &scope, &search.settings())?;
            println!(
                "scope {} ({} parameters): {} evaluations, {} feasible",
                scope.label(),
                s.genome_len,
                s.evaluations,
                s.feasible
            );
            for m in &s.front {
                println!("  h1={:.4} h2={:.4}  {}", m.h1, m.h2, describe(&m.delta));
            }
            let m = pinpoint_misconfiguration(&s.front, &r, &r.header.scene, &align)?;
            println!("misconfiguration: {} (ego deviation {:.4})", describe(&m.delta), m.deviation);
            Ok(0)
        }
        Cmd::Analyze {
            scenario,
            out,
            search,
            all_modules,
        } => {
            let s = load_scenario(scenario)?;
            let settings = search.settings();
            let opts = PipelineOptions {
                sim: sim_params(cli, search.seed),
                epsilon: cli.epsilon,
                physical: settings.clone(),
                cyber: settings,
                all_modules: *all_modules,
                ..PipelineOptions::default()
            };
            let run = run_pipeline(&s, &opts)?;
            run.write_to(out)?;
            print!("{}", run.report.render_text());
            Ok(run.exit_code())
        }
        Cmd::Report { run_dir } => {
            let r = RootCauseReport::load(run_dir.join(rootcause::pipeline::REPORT_JSON))?;
            print!("{}", r.render_text());
            Ok(0)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoAccidentSignature(_) => 2,
        Error::InvalidScenario(_)
        | Error::InvalidConfig(_)
        | Error::InvalidParams(_)
        | Error::RecordFormat(_)
        | Error::Io(_)
        | Error::Json(_)
        | Error::UnresolvedPath(_)
        | Error::InvalidDeltaEntry { .. } => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    // Usage errors are invalid input (4); clap would use 2, which means "no accident" here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 4 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
