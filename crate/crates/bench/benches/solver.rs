use std::f64::consts::{PI, SQRT_2};
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ddestab::design::optimal_delta;
use ddestab::model::{builtin, BuiltinParams};
use ddestab::{integrate, Controller, DelayFn, ScalarFn};

fn sunflower(c: &mut Criterion) {
    let params: BuiltinParams = [("x0".to_string(), 6.0)].into_iter().collect();
    let (sys, hist) = builtin("sunflower", &params).unwrap();
    let ctrl = Controller::damping(SQRT_2, 4.0, PI).unwrap();
    c.bench_function("integrate sunflower t=60 dt=0.005", |b| {
        b.iter(|| integrate(black_box(&sys), &ctrl, &hist, 60.0, 0.005).unwrap())
    });
}

fn saturating(c: &mut Criterion) {
    let params: BuiltinParams = [("n".to_string(), 8.0)].into_iter().collect();
    let (sys, hist) = builtin("saturating_feedback", &params).unwrap();
    let ctrl = Controller::delayed_proportional(1.0, DelayFn::constant(10.0).unwrap()).unwrap();
    c.bench_function("integrate saturating t=300 dt=0.005", |b| {
        b.iter(|| integrate(black_box(&sys), &ctrl, &hist, 300.0, 0.005).unwrap())
    });
}

fn delta_search(c: &mut Criterion) {
    c.bench_function("optimal_delta", |b| {
        b.iter(|| optimal_delta(black_box(1.0), black_box(2.0), 0.01).unwrap())
    });
}

fn expressions(c: &mut Criterion) {
    let f = ScalarFn::parse("1 + 0.5*sin(2*t) - exp(-t/10)^2").unwrap();
    c.bench_function("expression eval", |b| b.iter(|| f.eval(black_box(3.7)).unwrap()));
    c.bench_function("expression parse", |b| {
        b.iter(|| ScalarFn::parse(black_box("t - 1 - 0.5*abs(sin(t))")).unwrap())
    });
}

criterion_group!(benches, sunflower, saturating, delta_search, expressions);
criterion_main!(benches);
