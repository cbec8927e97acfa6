//! Guided evolutionary strategies.
//!
//! Random search whose Gaussian search distribution is stretched along a
//! low-dimensional subspace spanned by recent surrogate gradients. The search
//! covariance is
//!
//! ```text
//! Σ = (α/n)·I + ((1−α)/k)·U·Uᵀ
//! ```
//!
//! where `U` is an orthonormal `n×k` basis of the guiding subspace. `Σ` is never
//! materialized; everything works through the factors `(α, β, σ, U)`.
//!
//! The crate is organized bottom-up:
//!
//! * [`types`] holds the shared value types ([`SearchConfig`], [`SubspaceBasis`], ...).
//! * [`subspace`] keeps the FIFO of surrogate gradients and orthonormalizes it.
//! * [`rng`] maps `(seed, purpose, iteration, index)` keys to independent streams.
//! * [`sampler`] draws perturbations from `N(0, σ²Σ)` via the low-rank factorization.
//! * [`estimator`] forms the antithetic finite-difference descent direction.
//! * [`analysis`] has the closed-form bias/variance profile and the optimal
//!   hyperparameter solver, plus Monte Carlo checks of both.
//! * [`optim`] contains SGD and Adam.
//! * [`problems`] has the benchmark objectives and a small MLP.
//! * [`harness`] runs seeded experiments, aggregates traces and writes CSV.

pub mod analysis;
pub mod estimator;
pub mod harness;
pub mod optim;
pub mod problems;
pub mod rng;
pub mod sampler;
pub mod subspace;
pub mod types;

pub use estimator::{estimate_gradient, expected_update, EstimateError, Objective};
pub use optim::{Optimizer, OptimizerError};
pub use rng::{Purpose, StreamKey};
pub use sampler::{antithetic_pair, sample_perturbation, PerturbationPair, SamplerError};
pub use subspace::{basis_of, correlation, CorrelationVector, SubspaceBuffer, SubspaceError};
pub use types::{ConfigError, ErrorProfile, GradientEstimate, RunRecord, SearchConfig, SubspaceBasis};

/// Dense column vector used throughout the crate.
pub type Vector = nalgebra::DVector<f64>;
/// Dense column-major matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
