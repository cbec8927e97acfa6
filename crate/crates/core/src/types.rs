//! Value types shared across the crate.

use crate::{Matrix, Vector};
use thiserror::Error;

/// Hyperparameters of the guided search distribution.
///
/// Together with a [`SubspaceBasis`] these define the perturbation law
/// `N(0, σ²Σ)` with `Σ = (α/n)·I + ((1−α)/k)·U·Uᵀ` and the estimator scale `β`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchConfig {
    /// Split of the variance between the full space (`α = 1`) and the subspace (`α = 0`).
    pub alpha: f64,
    /// Overall scale of the gradient estimate.
    pub beta: f64,
    /// Perturbation scale.
    pub sigma: f64,
    /// Antithetic pairs per estimate.
    pub pairs: usize,
    /// Subspace dimension `k`.
    pub subspace_dim: usize,
    /// Parameter dimension `n`.
    pub param_dim: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{field} out of range: {value}")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("subspace dimension {k} exceeds parameter dimension {n}")]
    SubspaceExceedsDim { k: usize, n: usize },
}

impl SearchConfig {
    /// Defaults used for every experiment: `α = 1/2`, `β = 2`, `σ = 0.1`, one pair.
    pub fn new(param_dim: usize, subspace_dim: usize) -> Self {
        Self {
            alpha: 0.5,
            beta: 2.0,
            sigma: 0.1,
            pairs: 1,
            subspace_dim,
            param_dim,
        }
    }

    /// Isotropic search (`α = 1`), i.e. vanilla ES.
    pub fn vanilla(param_dim: usize, beta: f64, sigma: f64, pairs: usize) -> Self {
        Self {
            alpha: 1.0,
            beta,
            sigma,
            pairs,
            subspace_dim: 1,
            param_dim,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_pairs(mut self, pairs: usize) -> Self {
        self.pairs = pairs;
        self
    }

    /// Returns `self` unchanged when every range constraint holds.
    pub fn validate(self) -> Result<Self, ConfigError> {
        let range = |field, value: f64, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange { field, value })
            }
        };
        range("alpha", self.alpha, (0.0..=1.0).contains(&self.alpha))?;
        range("beta", self.beta, self.beta >= 0.0 && self.beta.is_finite())?;
        range("sigma", self.sigma, self.sigma > 0.0 && self.sigma.is_finite())?;
        range("pairs", self.pairs as f64, self.pairs >= 1)?;
        range("subspace_dim", self.subspace_dim as f64, self.subspace_dim >= 1)?;
        range("param_dim", self.param_dim as f64, self.param_dim >= 1)?;
        if self.subspace_dim > self.param_dim {
            return Err(ConfigError::SubspaceExceedsDim {
                k: self.subspace_dim,
                n: self.param_dim,
            });
        }
        Ok(self)
    }

    /// Trace of `Σ` for a basis of the given effective rank.
    ///
    /// Equals one whenever the basis is nonempty or `α = 1`.
    pub fn covariance_trace(&self, rank: usize) -> f64 {
        let full = self.alpha / self.param_dim as f64 * self.param_dim as f64;
        if rank == 0 {
            return full;
        }
        full + (1.0 - self.alpha) / rank as f64 * rank as f64
    }
}

/// Orthonormal basis `U` of the guiding subspace.
///
/// Only the `effective_rank` independent columns are stored; the configured
/// capacity `k` is kept alongside. During warm-up or after rank loss the rank
/// is smaller than the capacity and takes its place in `Σ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis {
    columns: Matrix,
    capacity: usize,
}

impl SubspaceBasis {
    /// Basis with no columns, which only supports isotropic search.
    pub fn empty(dim: usize, capacity: usize) -> Self {
        Self {
            columns: Matrix::zeros(dim, 0),
            capacity,
        }
    }

    /// Wraps columns that the caller guarantees are orthonormal.
    pub(crate) fn from_orthonormal(columns: Matrix, capacity: usize) -> Self {
        debug_assert!(columns.ncols() <= capacity);
        Self { columns, capacity }
    }

    /// Orthonormalizes arbitrary columns (dropping dependent ones).
    pub fn from_columns(columns: &Matrix) -> Self {
        let vectors: Vec<Vector> = columns.column_iter().map(|c| c.into_owned()).collect();
        let (basis, _) = crate::subspace::orthonormalize(columns.nrows(), vectors.iter());
        Self::from_orthonormal(basis, columns.ncols())
    }

    pub fn dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn effective_rank(&self) -> usize {
        self.columns.ncols()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn columns(&self) -> &Matrix {
        &self.columns
    }

    /// `Uᵀv`
    pub fn coefficients(&self, v: &Vector) -> Vector {
        self.columns.tr_mul(v)
    }

    /// `U·c`
    pub fn combine(&self, coefficients: &Vector) -> Vector {
        &self.columns * coefficients
    }

    /// `U·Uᵀ·v`
    pub fn project(&self, v: &Vector) -> Vector {
        self.combine(&self.coefficients(v))
    }
}

/// Output of one estimator call.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate {
    pub direction: Vector,
    pub function_evals: usize,
    pub surrogate_grad_evals: usize,
}

/// Normalized squared bias and total variance of the estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorProfile {
    pub bias: f64,
    pub variance: f64,
    pub total: f64,
    pub rho_sq: f64,
}

impl ErrorProfile {
    pub fn new(bias: f64, variance: f64, rho_sq: f64) -> Self {
        Self {
            bias,
            variance,
            total: bias + variance,
            rho_sq,
        }
    }
}

/// One iteration of one seeded run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub iteration: usize,
    pub loss: f64,
    /// `f(x) − f*`.
    pub suboptimality: f64,
    /// `‖ρ‖₂` between the guiding direction(s) and the true gradient, when a
    /// surrogate is in use.
    pub correlation: Option<f64>,
    /// `|η_pred − η*|` for the learned learning-rate controller.
    pub lr_error: Option<f64>,
    pub function_evals: usize,
    pub surrogate_grad_evals: usize,
    pub seed: u64,
}
