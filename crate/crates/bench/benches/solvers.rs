use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hexkey_core::corpus::{ingest_phrases, joint_probabilities, phrases, BUILTIN_PHRASES};
use hexkey_core::fitts::generic_model;
use hexkey_core::layout::build_cost_matrix;
use hexkey_core::qap::{solve_faq, solve_lap};
use hexkey_core::{default_grid, eval::anisotropic_model, FaqParams, QapInstance};

/// The production-sized instance: 27 symbols on the 81-key grid.
fn keyboard_instance() -> QapInstance {
    let p = joint_probabilities(&ingest_phrases(phrases(BUILTIN_PHRASES))).unwrap();
    let flow = Array2::from_shape_fn((27, 27), |(i, j)| p[i][j]);
    let cost = build_cost_matrix(&anisotropic_model(130.0, 0.83, 0.5, 2.0), &default_grid()).unwrap();
    QapInstance::new(flow, cost).unwrap()
}

fn faq(c: &mut Criterion) {
    let inst = keyboard_instance();
    let mut group = c.benchmark_group("solve_faq");
    group.sample_size(10);
    group.bench_function("m81_restarts1", |b| {
        b.iter(|| {
            solve_faq(
                &inst,
                &FaqParams {
                    restarts: 1,
                    ..FaqParams::default()
                },
            )
            .unwrap()
        })
    });
    group.bench_function("m81_restarts10", |b| {
        b.iter(|| solve_faq(&inst, &FaqParams::default()).unwrap())
    });
    group.finish();
}

fn lap(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for m in [27usize, 81] {
        c.bench_function(&format!("solve_lap/m{m}"), |b| {
            b.iter_batched(
                || Array2::from_shape_fn((m, m), |_| rng.random_range(0.0..1.0)),
                |cost| solve_lap(&cost).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
}

fn cost_matrix(c: &mut Criterion) {
    let grid = default_grid();
    let model = generic_model(130.0);
    c.bench_function("build_cost_matrix/m81", |b| {
        b.iter(|| build_cost_matrix(&model, &grid).unwrap())
    });
}

criterion_group!(benches, faq, lap, cost_matrix);
criterion_main!(benches);
