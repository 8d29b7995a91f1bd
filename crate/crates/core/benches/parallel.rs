use std::hint::black_box;

use atomsys::greens::example::example_spec;
use atomsys::greens::{greens_table, ResolventContext};
use atomsys::relations::{default_self_adjoint, tmax_subspace};
use atomsys::verify::verify;
use atomsys::{Execution, Tolerances, C64};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn kernel_table(c: &mut Criterion) {
    let tol = Tolerances::default();
    let mut group = c.benchmark_group("greens_table");
    group.sample_size(20);
    for m in [2, 6] {
        let ex = example_spec(m).unwrap();
        let spec = ex.spec();
        let tmax = tmax_subspace(&spec, &tol).unwrap();
        let t = default_self_adjoint(&spec, &tmax, &tol).unwrap();
        let ctx = ResolventContext::new(&spec, &t.relation, C64::new(0.0, 2.0), &tol).unwrap();
        let points: Vec<f64> = (0..4 * m).map(|k| k as f64 + 1.5).filter(|&x| x < spec.b()).collect();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, m), &exec, |b, &exec| {
                b.iter(|| greens_table(black_box(&ctx), &points, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn verify_trials(c: &mut Criterion) {
    let tol = Tolerances::default();
    let ex = example_spec(2).unwrap();
    let spec = ex.spec();
    let mut group = c.benchmark_group("verify");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| verify(black_box(&spec), Some(&ex), 7, 16, &tol, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, kernel_table, verify_trials);
criterion_main!(benches);
