use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rootcause::cyber::{cyber_search, Scope};
use rootcause::exec::Executor;
use rootcause::fixtures::fixture;
use rootcause::physical::nsga2_search;
use rootcause::sim::{run_execution, SimulationParams};
use rootcause::search::MopSettings;

const EXECUTORS: [(&str, Executor); 2] = [("sequential", Executor::Sequential), ("parallel", Executor::Parallel)];

fn settings(exec: Executor) -> MopSettings {
    MopSettings {
        population: 24,
        generations: 4,
        executor: exec,
        ..MopSettings::default()
    }
}

fn searches(c: &mut Criterion) {
    let s = fixture("s3").unwrap().scenario().unwrap();
    let (p0, c0) = (s.condition().unwrap(), s.config().unwrap());
    let (_, _, record) = run_execution(&c0, &p0, &SimulationParams::default()).unwrap();

    let mut g = c.benchmark_group("physical_search");
    g.sample_size(10);
    for (name, exec) in EXECUTORS {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(nsga2_search(&record, &p0, &c0, &settings(exec)).unwrap()))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("cyber_search");
    g.sample_size(10);
    let scope = Scope::Module("perception".into());
    for (name, exec) in EXECUTORS {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(cyber_search(&record, &p0, &scope, &settings(exec)).unwrap()))
        });
    }
    g.finish();
}

fn batch_simulation(c: &mut Criterion) {
    let s = fixture("s1").unwrap().scenario().unwrap();
    let (p0, c0) = (s.condition().unwrap(), s.config().unwrap());
    let seeds: Vec<u64> = (0..32).collect();
    let mut g = c.benchmark_group("simulate_32");
    g.sample_size(10);
    for (name, exec) in EXECUTORS {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, exec| {
            b.iter(|| {
                exec.map(&seeds, |&seed| {
                    let params = SimulationParams { seed, ..SimulationParams::default() };
                    run_execution(&c0, &p0, &params).unwrap().1
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, searches, batch_simulation);
criterion_main!(benches);
