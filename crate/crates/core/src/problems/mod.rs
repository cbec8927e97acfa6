//! Benchmark problems.

pub mod mlp;
pub mod quadratic;
pub mod synthetic;
pub mod unrolled;

use thiserror::Error;

pub use mlp::{Mlp, OutputTransform};
pub use quadratic::{QuadraticProblem, SeparableQuadratic};
pub use synthetic::{ReplayBuffer, SyntheticGradProblem};
pub use unrolled::UnrolledProblem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("least-squares system is singular")]
    Singular,
}
