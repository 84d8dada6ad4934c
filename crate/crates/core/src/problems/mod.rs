//! Benchmark objectives.

mod analytic;
mod mf;
mod phase;

pub use analytic::{
    LeastSquares, Quadratic, Rastrigin, Rosenbrock, SeparablePolynomial, DEFAULT_SHIFT,
};
pub use mf::{
    load_ratings, mf_eval, mf_grad, synth_ratings, MatrixFactorization, Rating, SynthSpec,
    Synthetic, TRAIN_FRACTION,
};
pub use phase::{ComplexVector, PhaseRetrieval, TruthKind};
