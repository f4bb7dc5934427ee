use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use fbpinn_bench::{filled_memory, poisson1d_setup};
use fbpinn_core::{Objective, SplitObjective};

fn physics_loss(c: &mut Criterion) {
    let setup = poisson1d_setup(20, 3000).unwrap();
    let theta = setup.model.theta.values.clone();
    let mut grad = vec![0.0; theta.len()];
    c.bench_function("loss_3000pts_20sub", |b| {
        b.iter(|| setup.objective.loss(black_box(&theta)).unwrap())
    });
    c.bench_function("loss_grad_3000pts_20sub", |b| {
        b.iter(|| setup.objective.loss_grad(black_box(&theta), &mut grad).unwrap())
    });
    let local = setup.objective.local(7, &theta).unwrap();
    let th = &theta[setup.model.layout().range(7)];
    let mut g = vec![0.0; th.len()];
    c.bench_function("local_loss_grad", |b| {
        b.iter(|| local.loss_grad(black_box(th), &mut g).unwrap())
    });
}

fn two_loop(c: &mut Criterion) {
    let (memory, g) = filled_memory(18_420, 10);
    c.bench_function("two_loop_n18420_m10", |b| b.iter(|| memory.two_loop(black_box(&g))));
}

criterion_group!(benches, physics_loss, two_loop);
criterion_main!(benches);
