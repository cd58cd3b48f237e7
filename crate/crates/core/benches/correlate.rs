use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use distal_core::analytic::AnalyticSeries;
use distal_core::cfrac::{Alpha, AlphaSpec};
use distal_core::correlate::{mobius_correlate, PolyPhase, SkewObservable};
use distal_core::flows::{Character, SkewFlow, TorusPoint};
use distal_core::mobius::{mobius_sieve_with, SieveOptions};
use distal_core::reduce::Exec;
use std::hint::black_box;

const N: u64 = 1_000_000;

fn execs() -> [(&'static str, Exec); 2] {
    [("sequential", Exec::Sequential), ("parallel", Exec::Parallel { threads: 0 })]
}

fn skew(c: &mut Criterion) {
    let table = mobius_sieve_with(N, SieveOptions::default()).unwrap();
    let alpha = Alpha::new(&AlphaSpec::sqrt2_minus_1().for_n_max(N * N)).unwrap();
    let flow = SkewFlow::normalized(1, alpha, AnalyticSeries::exp_decay(1.0, 20).unwrap()).unwrap();
    let obs = SkewObservable::new(&flow, TorusPoint::new(0.1, 0.2), Character::new(0, 1));
    let mut g = c.benchmark_group("skew_correlate");
    g.sample_size(10);
    for (name, exec) in execs() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, exec| {
            b.iter(|| mobius_correlate(&obs, &table, black_box(&[N / 100, N / 10, N]), exec).unwrap())
        });
    }
    g.finish();
}

fn poly(c: &mut Criterion) {
    let table = mobius_sieve_with(N, SieveOptions::default()).unwrap();
    let phase = PolyPhase::new(vec![0.0, 0.296, 0.0271, 1.3e-9], 1, 0).unwrap();
    let mut g = c.benchmark_group("poly_correlate");
    g.sample_size(10);
    for (name, exec) in execs() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, exec| {
            b.iter(|| mobius_correlate(&phase, &table, black_box(&[N]), exec).unwrap())
        });
    }
    g.finish();
}

fn sieve(c: &mut Criterion) {
    let mut g = c.benchmark_group("sieve");
    g.sample_size(10);
    for (name, exec) in execs() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| mobius_sieve_with(black_box(N), SieveOptions { exec, ..SieveOptions::default() }).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, skew, poly, sieve);
criterion_main!(benches);
