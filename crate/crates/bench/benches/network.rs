use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mamsr::model::{network_backward, network_forward, network_forward_cached};
use mamsr::{Image, Model, NetworkConfig, Paths, Shape};
use mamsr_bench::activations;

fn forward(c: &mut Criterion) {
    let mut group = c.benchmark_group("network_forward");
    group.sample_size(10);
    let x = activations(Shape::new(1, 3, 48, 48));
    for scale in [2, 3, 4] {
        let model = Model::new(NetworkConfig::new(16, 64, scale, Paths::ALL), 0, [0.45; 3]).unwrap();
        group.bench_function(BenchmarkId::new("R16C64", format!("x{scale}")), |b| {
            b.iter(|| network_forward(black_box(&x), &model.params, &model.cfg).unwrap())
        });
    }
    group.finish();
}

fn train_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("network_train_step");
    group.sample_size(10);
    let model = Model::new(NetworkConfig::new(4, 16, 2, Paths::ALL), 0, [0.45; 3]).unwrap();
    let x = activations(Shape::new(4, 3, 24, 24));
    group.bench_function("R4C16_b4_p24", |b| {
        b.iter(|| {
            let (y, cache) = network_forward_cached(black_box(&x), &model.params, &model.cfg).unwrap();
            network_backward(&model.params, &model.cfg, &cache, &y).unwrap()
        })
    });
    group.finish();
}

fn super_resolve(c: &mut Criterion) {
    let model = Model::new(NetworkConfig::new(4, 16, 2, Paths::ALL), 0, [0.45; 3]).unwrap();
    let img = Image::from_fn(64, 64, |x, y| [x as f32 / 64.0, y as f32 / 64.0, 0.5]);
    c.bench_function("super_resolve_R4C16_64x64", |b| b.iter(|| model.super_resolve(black_box(&img)).unwrap()));
}

criterion_group!(benches, forward, train_step, super_resolve);
criterion_main!(benches);
