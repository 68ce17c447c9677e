use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use degen_core::inverse::{lipschitz_audit_with, monotonicity_scan_with};
use degen_core::{
    add_noise, build_table, build_table_with, minimize, Execution, InitialProfile, InversionConfig,
    NoiseSpec, ObservationSet, TraceModel,
};
use std::hint::black_box;

const STRATEGIES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn bench_table(c: &mut Criterion) {
    let mut group = c.benchmark_group("bessel_table_2000");
    for (name, exec) in STRATEGIES {
        group.bench_function(name, |b| {
            b.iter(|| build_table_with(black_box(2000), exec).unwrap())
        });
    }
    group.finish();
}

fn bench_scan_and_audit(c: &mut Criterion) {
    let table = build_table(2000).unwrap();
    let p = InitialProfile::XOneMinusX;
    let model = TraceModel::new(&p, &table);

    let mut group = c.benchmark_group("monotonicity_scan_512");
    for (name, exec) in STRATEGIES {
        group.bench_function(name, |b| {
            b.iter(|| monotonicity_scan_with(&model, black_box(0.2), 0.01, 0.99, 512, exec).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("lipschitz_audit_1000");
    for (name, exec) in STRATEGIES {
        group.bench_function(name, |b| {
            b.iter(|| {
                lipschitz_audit_with(&model, (0.1, 0.5), (0.05, 1.0), 1000, black_box(7), exec).unwrap()
            })
        });
    }
    group.finish();
}

fn bench_inversion(c: &mut Criterion) {
    let table = build_table(2000).unwrap();
    let p = InitialProfile::ConstOne;
    let model = TraceModel::new(&p, &table);
    let clean = ObservationSet::synthetic(&model, 0.35, &[0.05]).unwrap();

    let mut group = c.benchmark_group("multistart_minimize");
    for (name, exec) in STRATEGIES {
        for starts in [4usize, 16] {
            let cfg = InversionConfig {
                multistart: starts,
                execution: exec,
                ..InversionConfig::default()
            };
            group.bench_with_input(BenchmarkId::new(name, starts), &cfg, |b, cfg| {
                b.iter(|| minimize(&model, black_box(&clean), cfg).unwrap())
            });
        }
    }
    group.finish();

    let noisy: Vec<ObservationSet> = (0..20)
        .map(|seed| add_noise(&clean, NoiseSpec::uniform(1e-3, seed)).unwrap())
        .collect();
    let mut group = c.benchmark_group("noise_sweep_20_seeds");
    for (name, exec) in STRATEGIES {
        let cfg = InversionConfig {
            a_init: 0.1,
            multistart: 1,
            execution: Execution::Sequential,
            ..InversionConfig::default()
        };
        group.bench_function(name, |b| {
            b.iter(|| {
                degen_core::parallel::map_slice(exec, &noisy, |obs| {
                    minimize(&model, obs, &cfg).unwrap().a_hat
                })
            })
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_table, bench_scan_and_audit, bench_inversion
}
criterion_main!(benches);
