use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use kpp_core::eigen::{assemble, principal_eigenpair_with, EigenMethod};
use kpp_core::sweeps::GridPolicy;
use kpp_core::variational::{logspace, scan_h};
use kpp_core::{run_sweep, Execution, GridSpec, ShearSpec, SweepConfig};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bench_scan(c: &mut Criterion) {
    let grid = GridSpec::square(16).unwrap();
    let field = ShearSpec::parametric(1.0, 1).sample(&grid).unwrap();
    let lambdas = logspace(0.1, 5.0, 32);
    let mut group = c.benchmark_group("scan_h_16x16_32pts");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| scan_h(&field, &grid, 1.0, black_box(&lambdas), EigenMethod::ShiftInvert, mode).unwrap())
        });
    }
    group.finish();
}

fn bench_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep_8x16_4x2");
    group.sample_size(10);
    for (name, mode) in MODES {
        let mut cfg = SweepConfig::new(vec![0.25, 0.5, 0.75, 1.0], vec![0, 1]);
        cfg.grid = GridPolicy::Fixed { n_y: 8, n_tau: 16 };
        cfg.execution = mode;
        group.bench_function(name, |b| b.iter(|| run_sweep(black_box(&cfg)).unwrap()));
    }
    group.finish();
}

fn bench_eigen(c: &mut Criterion) {
    let mut group = c.benchmark_group("principal_eigenpair");
    group.sample_size(10);
    for n in [16, 24] {
        let grid = GridSpec::square(n).unwrap();
        let field = ShearSpec::parametric(1.0, 1).sample(&grid).unwrap();
        let op = assemble(&grid, &field, 1.0, 1.0).unwrap();
        for (name, method) in [("shift_invert", EigenMethod::ShiftInvert), ("dense", EigenMethod::Dense)] {
            group.bench_with_input(BenchmarkId::new(name, n), &op, |b, op| {
                b.iter(|| principal_eigenpair_with(op, method).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_scan, bench_sweep, bench_eigen);
criterion_main!(benches);
