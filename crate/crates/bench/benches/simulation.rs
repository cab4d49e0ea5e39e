use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use wgklm_core::analysis::{sweep, SweepKind, SweepOptions};
use wgklm_core::{
    averaged_fidelity, run_protocol, BroadeningModel, EmitterParams, ProtocolKind, ProtocolParams, Purcell,
};

fn nominal() -> EmitterParams {
    EmitterParams::new(Purcell::Finite(100.0), 0.05)
}

fn protocols(c: &mut Criterion) {
    let mut group = c.benchmark_group("run");
    for n in [2, 3, 6, 10] {
        let params = ProtocolParams::new(n, nominal());
        group.bench_function(format!("klm{n}"), |b| {
            b.iter(|| run_protocol(black_box(&params), ProtocolKind::for_n(n)).unwrap())
        });
    }
    group.finish();
}

fn sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    group.sample_size(20);
    let options = SweepOptions::default();
    for kind in [SweepKind::Fig5a, SweepKind::Fig6, SweepKind::Fig7] {
        let grid = kind.default_grid();
        group.bench_function(kind.name(), |b| {
            b.iter(|| sweep(kind, black_box(&grid), &options).unwrap())
        });
    }
    group.finish();
}

fn broadening(c: &mut Criterion) {
    let mut group = c.benchmark_group("broadening");
    group.sample_size(10);
    group.bench_function("gauss_hermite_n2_order20", |b| {
        b.iter(|| averaged_fidelity(2, &nominal(), &BroadeningModel::gauss_hermite(0.1, 20)).unwrap())
    });
    group.bench_function("monte_carlo_n2_10k", |b| {
        b.iter(|| averaged_fidelity(2, &nominal(), &BroadeningModel::monte_carlo(0.1, 10_000, 1)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, protocols, sweeps, broadening);
criterion_main!(benches);
