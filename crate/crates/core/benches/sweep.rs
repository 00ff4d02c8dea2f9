use criterion::{criterion_group, criterion_main, Criterion};
use gfl_emt::simulator::{default_scenarios, run_batch, run_batch_sequential, Scenario, SimConfig};
use std::hint::black_box;

fn jobs() -> Vec<(Scenario, SimConfig)> {
    let mut jobs = Vec::new();
    for kf in [10.0, 20.0, 40.0] {
        for case in default_scenarios() {
            let mut scenario = case.scenario;
            scenario.freq_support.kf = kf;
            jobs.push((scenario, SimConfig { t_end: 0.06, ..case.config }));
        }
    }
    jobs
}

fn batch(c: &mut Criterion) {
    let jobs = jobs();
    let mut group = c.benchmark_group("batch");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| run_batch_sequential(black_box(&jobs))));
    group.bench_function("parallel", |b| b.iter(|| run_batch(black_box(&jobs))));
    group.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);
