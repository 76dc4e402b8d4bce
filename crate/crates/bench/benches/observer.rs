use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use framer_bench::{predator_prey, sine_model};
use framer_core::nalgebra::{DMatrix, DVector};
use framer_core::IntervalVector;

fn observer_runs(c: &mut Criterion) {
    let mut group = c.benchmark_group("observer");
    group.sample_size(20);
    for mode in ["learned", "known_h"] {
        let exp = predator_prey(mode, 500);
        let gain = DMatrix::zeros(3, 3);
        group.bench_function(BenchmarkId::new("predator_prey_500", mode), |b| {
            b.iter(|| exp.run_seed(7, &gain, None).unwrap())
        });
    }
    group.finish();
}

fn learner_queries(c: &mut Criterion) {
    let mut group = c.benchmark_group("learner");
    let query =
        IntervalVector::new(DVector::from_element(1, 0.4), DVector::from_element(1, 0.6)).unwrap();
    for n in [50, 500] {
        let model = sine_model(n, None);
        group.bench_function(BenchmarkId::new("box_bounds", n), |b| {
            b.iter(|| model.box_bounds(&query).unwrap())
        });
    }
    group.bench_function("ingest_windowed_500", |b| {
        b.iter(|| sine_model(500, Some(50)))
    });
    group.finish();
}

criterion_group!(benches, observer_runs, learner_queries);
criterion_main!(benches);
