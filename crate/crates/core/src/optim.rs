//! First-order update rules fed by gradient estimates.
//!
//! Adam multiplies its input by a data-dependent diagonal preconditioner. The
//! expected guided update is already a PSD matrix times the gradient, and the
//! product of two PSD matrices need not be PSD, so Adam on guided estimates is
//! not guaranteed to descend in expectation.

use thiserror::Error;

use crate::Vector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("dimension mismatch: parameters have {params}, update has {update}")]
    DimensionMismatch { params: usize, update: usize },
    #[error("non-finite update component at index {0}")]
    NonFinite(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Optimizer {
    Sgd {
        learning_rate: f64,
    },
    Adam {
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        m: Vector,
        v: Vector,
        t: u64,
    },
}

impl Optimizer {
    pub fn sgd(learning_rate: f64) -> Self {
        Optimizer::Sgd { learning_rate }
    }

    /// Adam with `β₁ = 0.9`, `β₂ = 0.999`, `ε = 1e-8`.
    pub fn adam(learning_rate: f64, dim: usize) -> Self {
        Optimizer::Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: Vector::zeros(dim),
            v: Vector::zeros(dim),
            t: 0,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match self {
            Optimizer::Sgd { learning_rate } | Optimizer::Adam { learning_rate, .. } => *learning_rate,
        }
    }

    /// Moves `x` against `g`.
    pub fn step(&mut self, x: &mut Vector, g: &Vector) -> Result<(), OptimizerError> {
        if x.len() != g.len() {
            return Err(OptimizerError::DimensionMismatch {
                params: x.len(),
                update: g.len(),
            });
        }
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(OptimizerError::NonFinite(i));
        }
        match self {
            Optimizer::Sgd { learning_rate } => x.axpy(-*learning_rate, g, 1.0),
            Optimizer::Adam {
                learning_rate,
                beta1,
                beta2,
                epsilon,
                m,
                v,
                t,
            } => {
                if m.len() != g.len() {
                    return Err(OptimizerError::DimensionMismatch {
                        params: m.len(),
                        update: g.len(),
                    });
                }
                *t += 1;
                let c1 = 1.0 - beta1.powi(*t as i32);
                let c2 = 1.0 - beta2.powi(*t as i32);
                for i in 0..g.len() {
                    m[i] = *beta1 * m[i] + (1.0 - *beta1) * g[i];
                    v[i] = *beta2 * v[i] + (1.0 - *beta2) * g[i] * g[i];
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    x[i] -= *learning_rate * m_hat / (v_hat.sqrt() + *epsilon);
                }
            }
        }
        Ok(())
    }
}
