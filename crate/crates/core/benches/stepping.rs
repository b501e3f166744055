use std::path::Path;

use criterion::{black_box, criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};

use batsim_core::bench::request_sequence;
use batsim_core::config::ScenarioConfig;
use batsim_core::engine;
use batsim_core::models::{ModelKind, PackBattery, PackParams, Parallelism};
use batsim_core::storage::Storage;
use batsim_core::units::{DurationS, Soc};

fn pack(ns: usize, np: usize, parallelism: Parallelism) -> PackBattery {
    let mut params = PackParams::uniform(ns, np, Soc::new(0.5).unwrap());
    params.parallelism = parallelism;
    PackBattery::new(params).unwrap()
}

fn pack_step(c: &mut Criterion) {
    let step = DurationS::new(60.0).unwrap();
    let mut group = c.benchmark_group("pack_step");
    for (ns, np) in [(32, 32), (128, 128)] {
        let cells = ns * np;
        let requests = request_sequence(cells, 256, 1);
        for (label, mode) in [("sequential", Parallelism::Sequential), ("parallel", Parallelism::Parallel)] {
            group.bench_with_input(BenchmarkId::new(label, cells), &requests, |b, requests| {
                let mut battery = pack(ns, np, mode);
                let mut i = 0;
                b.iter(|| {
                    let p = requests[i % requests.len()];
                    i += 1;
                    black_box(battery.update(black_box(p), step).unwrap())
                });
            });
        }
    }
    group.finish();
}

fn scenario_batch(c: &mut Criterion) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/datacenter_two_day.toml");
    let base = ScenarioConfig::from_path(&path).unwrap();
    let configs: Vec<ScenarioConfig> = ModelKind::ALL.iter().map(|&m| base.with_model(m)).collect();
    let mut group = c.benchmark_group("scenario_batch");
    group.sample_size(10);
    for (label, parallel) in [("sequential", false), ("parallel", true)] {
        group.bench_function(label, |b| {
            b.iter_batched(
                || configs.clone(),
                |configs| black_box(engine::run_many(configs, parallel)),
                BatchSize::LargeInput,
            );
        });
    }
    group.finish();
}

criterion_group!(benches, pack_step, scenario_batch);
criterion_main!(benches);
