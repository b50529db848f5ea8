use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use viscojoint::damper::linspace;
use viscojoint::finger::standard_sweep;
use viscojoint::pendulum::DEFAULT_SAMPLE_INTERVAL;
use viscojoint::{
    fin_g_factor, fit, quasi_static_sweep, run_trial, simulate, sweep_g, CatchConfig, DamperGeometry, FingerChain,
    FitMode, FitSpec, PendulumParams, TendonDrive,
};

fn damper(c: &mut Criterion) {
    let g = DamperGeometry::default();
    c.bench_function("fin_g_factor", |b| b.iter(|| fin_g_factor(black_box(&g), 2).unwrap()));
    let walls = linspace(0.1e-3, 1.5e-3, 15);
    c.bench_function("sweep_g 15x15", |b| {
        b.iter(|| sweep_g(black_box(&walls), &walls, g.n_fins, &g, 0.3e-3).unwrap())
    });
}

fn pendulum(c: &mut Criterion) {
    let p = PendulumParams::default();
    c.bench_function("simulate 6 s", |b| {
        b.iter(|| simulate(black_box(&p), 1.5, 0.0, 6.0, DEFAULT_SAMPLE_INTERVAL).unwrap())
    });
    let truth = PendulumParams { damping_b: 1e-3, ..p };
    let obs: Vec<_> = [2.0, 2.3]
        .iter()
        .map(|&a| simulate(&truth, a, 0.0, 1.0, DEFAULT_SAMPLE_INTERVAL).unwrap())
        .collect();
    let spec = FitSpec { restarts: 0, ..FitSpec::for_mode(FitMode::Damped) };
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    group.bench_function("damped 2 drops", |b| b.iter(|| fit(black_box(&obs), &spec, &p).unwrap()));
    group.finish();
}

fn finger(c: &mut Criterion) {
    let chain = FingerChain::default();
    let drive = TendonDrive::default();
    let motor = standard_sweep();
    c.bench_function("quasi_static_sweep", |b| {
        b.iter(|| quasi_static_sweep(black_box(&chain), &drive, &motor).unwrap())
    });
}

fn catching(c: &mut Criterion) {
    let cfg = CatchConfig::default();
    c.bench_function("run_trial", |b| b.iter(|| run_trial(black_box(&cfg), 3).unwrap()));
}

criterion_group!(benches, damper, pendulum, finger, catching);
criterion_main!(benches);
