//! Random least-squares problem with an explicitly biased surrogate gradient.

use crate::estimator::Objective;
use crate::rng::{gaussian_vector, unit_vector, Purpose, StreamKey};
use crate::{Matrix, Vector};

use super::ProblemError;

/// `f(x) = ‖Ax − b‖² / (2M)` with `A`, `b` IID standard normal.
///
/// The surrogate gradient is `∇f + (b̂ + n̂)·‖∇f‖` where `b̂` is a unit vector
/// drawn once per problem and `n̂` a fresh unit vector per iteration.
#[derive(Clone, Debug)]
pub struct QuadraticProblem {
    design: Matrix,
    target: Vector,
    /// `AᵀA / M`, the Hessian.
    hessian: Matrix,
    optimum: Vector,
    optimal_value: f64,
    bias_direction: Vector,
    seed: u64,
}

impl QuadraticProblem {
    /// Draws `A` (M×N), `b` and `b̂` from the seed and solves for the optimum.
    pub fn new(rows: usize, cols: usize, seed: u64) -> Result<Self, ProblemError> {
        let mut rng = StreamKey::new(seed, Purpose::ProblemInit).rng();
        let flat = gaussian_vector(&mut rng, rows * cols);
        let design = Matrix::from_row_slice(rows, cols, flat.as_slice());
        let target = gaussian_vector(&mut rng, rows);
        let bias_direction = unit_vector(&mut rng, cols);
        Self::from_parts(design, target, bias_direction, seed)
    }

    pub fn from_parts(design: Matrix, target: Vector, bias_direction: Vector, seed: u64) -> Result<Self, ProblemError> {
        let m = design.nrows() as f64;
        if target.len() != design.nrows() || bias_direction.len() != design.ncols() {
            return Err(ProblemError::DimensionMismatch {
                expected: design.ncols(),
                actual: bias_direction.len(),
            });
        }
        let hessian = design.transpose() * &design / m;
        let rhs = design.tr_mul(&target) / m;
        let optimum = hessian.clone().cholesky().ok_or(ProblemError::Singular)?.solve(&rhs);
        let residual = &design * &optimum - &target;
        let optimal_value = residual.norm_squared() / (2.0 * m);
        Ok(Self {
            design,
            target,
            hessian,
            optimum,
            optimal_value,
            bias_direction,
            seed,
        })
    }

    pub fn dim(&self) -> usize {
        self.design.ncols()
    }

    pub fn rows(&self) -> usize {
        self.design.nrows()
    }

    pub fn design(&self) -> &Matrix {
        &self.design
    }

    pub fn target(&self) -> &Vector {
        &self.target
    }

    pub fn hessian(&self) -> &Matrix {
        &self.hessian
    }

    pub fn optimum(&self) -> &Vector {
        &self.optimum
    }

    pub fn optimal_value(&self) -> f64 {
        self.optimal_value
    }

    pub fn bias_direction(&self) -> &Vector {
        &self.bias_direction
    }

    /// `f(x) − f*` and `∇f(x)` from one Hessian product.
    pub fn suboptimality_and_grad(&self, x: &Vector) -> (f64, Vector) {
        self.excess_and_gradient(x)
    }

    /// `½(x − x*)ᵀH(x − x*)` and `H(x − x*)`.
    fn excess_and_gradient(&self, x: &Vector) -> (f64, Vector) {
        let d = x - &self.optimum;
        let hd = &self.hessian * &d;
        (0.5 * d.dot(&hd).max(0.0), hd)
    }

    /// `f(x) − f*`, evaluated as `½(x − x*)ᵀH(x − x*)` so it is never negative.
    pub fn suboptimality(&self, x: &Vector) -> f64 {
        self.excess_and_gradient(x).0
    }

    pub fn loss(&self, x: &Vector) -> f64 {
        self.optimal_value + self.suboptimality(x)
    }

    /// `‖Ax − b‖² / (2M)` computed from the design matrix directly.
    pub fn residual_loss(&self, x: &Vector) -> f64 {
        (&self.design * x - &self.target).norm_squared() / (2.0 * self.rows() as f64)
    }

    pub fn true_grad(&self, x: &Vector) -> Vector {
        self.excess_and_gradient(x).1
    }

    /// Loss and gradient from one Hessian product.
    pub fn loss_and_grad(&self, x: &Vector) -> (f64, Vector) {
        let (excess, grad) = self.excess_and_gradient(x);
        (self.optimal_value + excess, grad)
    }

    /// Biased, noisy gradient; the noise for `iteration` comes from its own stream.
    pub fn surrogate_grad(&self, x: &Vector, iteration: u64) -> Vector {
        self.surrogate_from_true(&self.true_grad(x), iteration)
    }

    pub fn surrogate_from_true(&self, grad: &Vector, iteration: u64) -> Vector {
        let mut rng = StreamKey::new(self.seed, Purpose::SurrogateNoise).at(iteration).rng();
        let noise = unit_vector(&mut rng, self.dim());
        let scale = grad.norm();
        grad + (&self.bias_direction + noise) * scale
    }
}

impl Objective for QuadraticProblem {
    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn eval(&self, x: &Vector) -> f64 {
        self.loss(x)
    }
}

/// `f(x) = ½·Σᵢ hᵢxᵢ² + cᵀx`, a quadratic with diagonal Hessian that costs
/// `O(n)` per evaluation.
#[derive(Clone, Debug)]
pub struct SeparableQuadratic {
    pub curvature: Vector,
    pub linear: Vector,
}

impl SeparableQuadratic {
    pub fn gradient(&self, x: &Vector) -> Vector {
        self.curvature.component_mul(x) + &self.linear
    }

    /// A quadratic whose gradient at `x` equals `grad`.
    pub fn with_gradient_at(curvature: Vector, x: &Vector, grad: &Vector) -> Self {
        let linear = grad - curvature.component_mul(x);
        Self { curvature, linear }
    }
}

impl Objective for SeparableQuadratic {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn eval(&self, x: &Vector) -> f64 {
        x.iter()
            .zip(self.curvature.iter().zip(self.linear.iter()))
            .map(|(&xi, (&h, &c))| (0.5 * h * xi + c) * xi)
            .sum()
    }
}
