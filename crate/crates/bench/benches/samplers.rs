use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use stablekit::feynman_kac::{mean_exit_time, McConfig};
use stablekit::path::PathEngine;
use stablekit::sampler::{cms_unit, sample_stable_isotropic, EnvelopeSampler, StableSpec};
use stablekit::{DomainSpec, Point, RngStream};
use stablekit_bench::{euler, stable, variable_order};

fn variates(c: &mut Criterion) {
    let mut rng = RngStream::new(1, 0);
    c.bench_function("cms_unit alpha=1.5", |b| b.iter(|| cms_unit(black_box(1.5), &mut rng)));
    let spec = StableSpec::new(1.5, 2, 1.0).unwrap();
    c.bench_function("isotropic stable d=2", |b| b.iter(|| sample_stable_isotropic(&spec, black_box(1e-3), &mut rng)));
    let vo = variable_order();
    let env = EnvelopeSampler::new(&vo, 1e-2);
    c.bench_function("envelope candidate", |b| b.iter(|| env.candidate(&mut rng)));
}

fn steps(c: &mut Criterion) {
    let mut rng = RngStream::new(2, 0);
    let m = stable(1, 1.5);
    let exact = PathEngine::new(&m, euler(1e-3, 1.5)).unwrap();
    c.bench_function("step exact stable", |b| {
        let mut x = Point::scalar(0.0);
        b.iter(|| exact.advance(0.0, &mut x, 1e-3, None, &mut rng, &mut ()))
    });
    let vo = variable_order();
    let thinned = PathEngine::new(&vo, euler(1e-3, 1.5)).unwrap();
    c.bench_function("step thinned variable order", |b| {
        let mut x = Point::scalar(0.0);
        b.iter(|| thinned.advance(0.0, &mut x, 1e-3, None, &mut rng, &mut ()))
    });
}

fn exit_times(c: &mut Criterion) {
    let m = stable(1, 1.5);
    let dom = DomainSpec::interval(-1.0, 1.0).unwrap();
    let mc = McConfig::new(euler(1e-3, 1.5), 1000, 3);
    let mut g = c.benchmark_group("exit time");
    g.sample_size(10);
    g.bench_function("1000 paths alpha=1.5", |b| b.iter(|| mean_exit_time(&m, &dom, &Point::scalar(0.0), &mc).unwrap()));
    g.finish();
}

criterion_group!(benches, variates, steps, exit_times);
criterion_main!(benches);
