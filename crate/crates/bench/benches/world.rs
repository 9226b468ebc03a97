use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use hit_core::harness::scenarios;
use hit_core::{run_trial, ScenarioConfig, Variant, World};

fn ticks(c: &mut Criterion) {
    c.bench_function("world_300_ticks_hit", |b| {
        b.iter_batched(
            || {
                let mut w = World::new(ScenarioConfig::new(Variant::Hit, 3)).unwrap();
                w.set_keep_records(false);
                w
            },
            |mut w| {
                for _ in 0..300 {
                    w.step().unwrap();
                }
                w
            },
            criterion::BatchSize::SmallInput,
        )
    });
}

fn trials(c: &mut Criterion) {
    let mut g = c.benchmark_group("full_trial");
    g.sample_size(10);
    g.bench_function("two-failures", |b| b.iter(|| run_trial(black_box(&scenarios::two_failures(0))).unwrap()));
    g.bench_function("coexistence", |b| {
        b.iter(|| run_trial(black_box(&ScenarioConfig::new(Variant::Coexistence, 0))).unwrap())
    });
    g.finish();
}

criterion_group!(benches, ticks, trials);
criterion_main!(benches);
