use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use crjet_core::aut::{infinitesimal_aut_dim, Grading};
use crjet_core::hypersurface::build_frame;
use crjet_core::invariants::{analyze, lie_chains, verify_commutator_tensor_relation, FiltrationOptions};
use crjet_core::{models, Exec};

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn chains(c: &mut Criterion) {
    let m = models::random(7, 3, 8).unwrap();
    let frame = build_frame(&m).unwrap();
    let mut g = c.benchmark_group("lie_chains_depth3");
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| lie_chains(&frame, 3, exec).unwrap())
        });
    }
    g.finish();
}

fn filtration(c: &mut Criterion) {
    let m = models::m3(8).unwrap();
    let mut g = c.benchmark_group("analyze_m3");
    for (name, exec) in POLICIES {
        let opts = FiltrationOptions { exec, ..FiltrationOptions::defaults(3) };
        g.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| {
            b.iter(|| analyze(&m, opts.clone()).unwrap())
        });
    }
    g.finish();
}

fn identities(c: &mut Criterion) {
    let m = models::random(11, 3, 6).unwrap();
    let frame = build_frame(&m).unwrap();
    let mut g = c.benchmark_group("commutator_tensor_relation");
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| verify_commutator_tensor_relation(&frame, 3, exec).unwrap())
        });
    }
    g.finish();
}

fn tangency(c: &mut Criterion) {
    let m = models::heisenberg(3, 6).unwrap();
    let mut g = c.benchmark_group("aut_heisenberg_c3");
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| infinitesimal_aut_dim(&m, 2, 6, Grading::Weighted, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10).measurement_time(Duration::from_secs(5));
    targets = chains, filtration, identities, tangency
}
criterion_main!(benches);
