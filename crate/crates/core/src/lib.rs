//! Scalar auxiliary variable (SAV) optimizers for gradient flows.
//!
//! The crate provides the SAV family of explicit steppers (modified SAV,
//! relaxed and adaptive RSAV, the `q`-generalized form with line search),
//! classical baselines, benchmark objectives and an experiment harness.

pub mod baselines;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod objective;
pub mod operators;
pub mod problems;
pub mod sav;

pub use error::{Error, Result};
pub use objective::{BatchObjective, NoisyGradient, Objective};
pub use operators::{LinearOperator, Operator, OperatorKind};
