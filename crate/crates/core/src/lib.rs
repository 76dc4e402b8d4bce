pub mod benchmark;
pub mod decomposition;
pub mod error;
pub mod experiment;
pub mod interval;
pub mod learner;
pub mod observer;
pub mod synthesis;

pub use decomposition::{jss_decompose, JacobianBounds, JssDecomposition, VectorField};
pub use error::{Error, Result};
pub use interval::{bound_linear_map, split_pos_neg, IntervalVector, SignSplitMatrix};
pub use learner::{AbstractionModel, LipschitzSpec};
pub use observer::{run_observer, InputModel, IntervalObserver, PlantModel};
pub use synthesis::{GainCertificate, SynthesisInput, SynthesisOptions, SynthesisOutcome};

pub use nalgebra;
