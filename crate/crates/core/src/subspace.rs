//! Guiding subspace: a FIFO of recent surrogate gradients and its orthonormal basis.

use std::collections::VecDeque;

use thiserror::Error;

use crate::types::SubspaceBasis;
use crate::{Matrix, Vector};

/// Columns whose residual after projection falls below this fraction of the
/// largest entry norm are treated as dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubspaceError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("subspace buffer is empty")]
    Empty,
    #[error("all buffered gradients are zero; subspace is degenerate")]
    Degenerate,
}

/// The `k` most recent surrogate gradients, oldest first.
#[derive(Clone, Debug)]
pub struct SubspaceBuffer {
    capacity: usize,
    dim: usize,
    entries: VecDeque<Vector>,
}

impl SubspaceBuffer {
    pub fn new(capacity: usize, dim: usize) -> Self {
        assert!(capacity >= 1, "subspace capacity must be positive");
        Self {
            capacity,
            dim,
            entries: VecDeque::with_capacity(capacity + 1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &Vector> {
        self.entries.iter()
    }

    /// Appends a gradient, evicting the oldest one when full.
    ///
    /// Zero vectors are stored like any other entry; they never contribute a
    /// basis column. Returns `true` when the pushed vector is nonzero.
    pub fn push(&mut self, grad: Vector) -> Result<bool, SubspaceError> {
        if grad.len() != self.dim {
            return Err(SubspaceError::DimensionMismatch {
                expected: self.dim,
                actual: grad.len(),
            });
        }
        let nonzero = grad.iter().any(|&v| v != 0.0);
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(grad);
        Ok(nonzero)
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

/// Gram-Schmidt with one reorthogonalization pass, in input order.
///
/// Returns the orthonormal columns and, for every input, whether it
/// contributed a column.
pub(crate) fn orthonormalize<'a>(dim: usize, vectors: impl Iterator<Item = &'a Vector> + Clone) -> (Matrix, Vec<bool>) {
    let max_norm = vectors.clone().map(|v| v.norm()).fold(0.0, f64::max);
    let threshold = RANK_TOLERANCE * max_norm;
    let mut basis: Vec<Vector> = Vec::new();
    let mut kept = Vec::new();
    for v in vectors {
        let mut residual = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&residual);
                residual.axpy(-c, q, 1.0);
            }
        }
        let norm = residual.norm();
        if max_norm > 0.0 && norm > threshold {
            basis.push(residual / norm);
            kept.push(true);
        } else {
            kept.push(false);
        }
    }
    let columns = if basis.is_empty() {
        Matrix::zeros(dim, 0)
    } else {
        Matrix::from_columns(&basis)
    };
    (columns, kept)
}

/// Orthonormal basis of the span of the buffered gradients.
pub fn basis_of(buffer: &SubspaceBuffer) -> Result<SubspaceBasis, SubspaceError> {
    if buffer.is_empty() {
        return Err(SubspaceError::Empty);
    }
    let (columns, _) = orthonormalize(buffer.dim, buffer.entries.iter());
    if columns.ncols() == 0 {
        return Err(SubspaceError::Degenerate);
    }
    Ok(SubspaceBasis::from_orthonormal(columns, buffer.capacity))
}

/// Uncentered correlations `ρᵢ = ∇fᵀU·ᵢ / ‖∇f‖` between a gradient and the basis.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationVector {
    pub rho: Vector,
    pub norm: f64,
}

pub fn correlation(basis: &SubspaceBasis, grad: &Vector) -> Result<CorrelationVector, SubspaceError> {
    if grad.len() != basis.dim() {
        return Err(SubspaceError::DimensionMismatch {
            expected: basis.dim(),
            actual: grad.len(),
        });
    }
    let grad_norm = grad.norm();
    if grad_norm == 0.0 {
        return Ok(CorrelationVector {
            rho: Vector::zeros(basis.effective_rank()),
            norm: 0.0,
        });
    }
    let rho = basis.coefficients(grad) / grad_norm;
    let norm = rho.norm();
    Ok(CorrelationVector { rho, norm })
}
