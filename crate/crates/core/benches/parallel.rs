use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use totpos::coop_sim::{self, AssumptionOptions, EntrainmentOptions, NonlinearSystem};
use totpos::forms::builtin_spec;
use totpos::{tn, Exec};

const EXECS: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn classify(c: &mut Criterion) {
    let m = tn::random_tn(9, 30, 1).unwrap();
    let tol = tn::default_tol(&m);
    let mut g = c.benchmark_group("classify_n9");
    g.sample_size(10);
    for (name, exec) in EXECS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| tn::classify_with(black_box(&m), tol, exec).unwrap())
        });
    }
    g.finish();
}

fn assumptions(c: &mut Criterion) {
    let sys = NonlinearSystem::from_spec(&builtin_spec("d3").unwrap()).unwrap();
    let opts = AssumptionOptions {
        n_samples: 2000,
        ..AssumptionOptions::default()
    };
    let mut g = c.benchmark_group("check_assumptions_d3");
    g.sample_size(10);
    for (name, exec) in EXECS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| coop_sim::check_assumptions(black_box(&sys), &opts, exec))
        });
    }
    g.finish();
}

fn entrainment(c: &mut Criterion) {
    let sys = NonlinearSystem::from_spec(&builtin_spec("d3").unwrap()).unwrap();
    let x0s = sys.random_states(16, 2);
    let opts = EntrainmentOptions {
        certify: false,
        max_periods: 30,
        ..EntrainmentOptions::default()
    };
    let mut g = c.benchmark_group("entrainment_sweep_d3");
    g.sample_size(10);
    for (name, exec) in EXECS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| coop_sim::entrainment_sweep(black_box(&sys), &x0s, &opts, exec))
        });
    }
    g.finish();
}

criterion_group!(benches, classify, assumptions, entrainment);
criterion_main!(benches);
