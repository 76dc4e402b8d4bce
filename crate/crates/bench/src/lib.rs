//! Shared fixtures for the criterion benchmarks.

use framer_core::experiment::{Experiment, ExperimentConfig};
use framer_core::nalgebra::{DMatrix, DVector};
use framer_core::{AbstractionModel, IntervalVector, LipschitzSpec, SynthesisInput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Predator-prey experiment with zero gain in the given input mode
/// (`"learned"` or `"known_h"`).
pub fn predator_prey(mode: &str, horizon: usize) -> Experiment {
    let text = format!(
        r#"{{"system": {{"predator_prey": {{}}}},
            "observer": {{"horizon": {horizon}, "gain": "zero", "mode": "{mode}"}}}}"#
    );
    let config = ExperimentConfig::from_json_str(&text).expect("valid bench config");
    Experiment::new(config, std::env::temp_dir()).expect("bench experiment")
}

/// Random stable synthesis instance with no unknown input.
pub fn random_synthesis_input(n_z: usize, seed: u64) -> SynthesisInput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = 3;
    let scale = 0.8 / n_z as f64;
    let a = DMatrix::from_fn(n_z, n_z, |_, _| rng.random_range(0.0..scale));
    let f_psi = DMatrix::from_fn(l, n_z, |_, _| rng.random_range(0.0..0.05));
    let c = DMatrix::from_fn(l, n_z, |_, _| rng.random_range(-1.0..1.0));
    let w = DMatrix::from_fn(n_z, 2, |_, _| rng.random_range(0.0..0.1));
    SynthesisInput::new(a, f_psi, c, DMatrix::identity(l, l), w, vec![])
        .expect("random synthesis instance")
}

/// Abstraction model of `sin` on `[-3, 3]` filled with `samples` point pairs.
pub fn sine_model(samples: usize, window: Option<usize>) -> AbstractionModel {
    let lip = LipschitzSpec::new(vec![1.0]).expect("positive constant");
    let mut model = AbstractionModel::new(1, lip)
        .with_window(window)
        .expect("window");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for step in 0..samples {
        let z = rng.random_range(-3.0..3.0_f64);
        let input = IntervalVector::point(DVector::from_element(1, z));
        let output = IntervalVector::point(DVector::from_element(1, z.sin()));
        model
            .ingest_sample(input, output, step)
            .expect("consistent sample");
    }
    model
}
