use criterion::{black_box, criterion_group, criterion_main, Criterion};

use wsc_core::calculus::green;
use wsc_core::connection::christoffel_oracle;
use wsc_core::geodesic::geodesic_evolve;
use wsc_core::metric::gram;
use wsc_core::transport::w2_circle;
use wsc_core::{Density, Potential, TrigPoly};

fn cos1() -> Density {
    Density::builtin("cos1:0.1").unwrap()
}

fn bench_gram(c: &mut Criterion) {
    let mu = cos1();
    c.bench_function("gram N=16", |b| b.iter(|| gram(black_box(&mu), 16)));
}

fn bench_christoffel(c: &mut Criterion) {
    let mu = cos1();
    let mut group = c.benchmark_group("christoffel_oracle");
    group.sample_size(10);
    group.bench_function("N=8", |b| b.iter(|| christoffel_oracle(black_box(&mu), 8).unwrap()));
    group.finish();
}

fn bench_w2(c: &mut Criterion) {
    let (mu, nu) = (Density::uniform(), cos1());
    c.bench_function("w2_circle n=512", |b| {
        b.iter(|| w2_circle(black_box(&mu), black_box(&nu), 512).unwrap())
    });
}

fn bench_geodesic(c: &mut Criterion) {
    let psi = Potential::new(TrigPoly::sin_mode(1).scale(0.1));
    let mu = Density::uniform();
    c.bench_function("geodesic_evolve 20 steps", |b| {
        b.iter(|| geodesic_evolve(black_box(&mu), &psi, 0.5, 20).unwrap())
    });
}

fn bench_green(c: &mut Criterion) {
    let mu = cos1();
    let f = &TrigPoly::cos_mode(3) + &TrigPoly::sin_mode(5);
    c.bench_function("green", |b| b.iter(|| green(black_box(&mu), &f).unwrap()));
}

criterion_group!(benches, bench_gram, bench_christoffel, bench_w2, bench_geodesic, bench_green);
criterion_main!(benches);
