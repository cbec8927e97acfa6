//! Learning a learning rate through unrolled gradient descent.
//!
//! A controller network maps the sorted Hessian spectrum of a small
//! least-squares problem to a step size. The meta-loss is the inner loss after
//! `T` gradient steps from `x₀ = 0`. The surrogate gradient differentiates the
//! meta-loss truncated to one step, which is cheap but biased.

use crate::estimator::Objective;
use crate::rng::{Purpose, StreamKey};
use crate::{Matrix, Vector};

use super::mlp::{softplus_inverse, Mlp, OutputTransform};
use super::{ProblemError, QuadraticProblem};

pub const INNER_ROWS: usize = 20;
pub const INNER_COLS: usize = 10;
pub const FULL_HORIZON: usize = 15;
pub const TRUNCATED_HORIZON: usize = 1;
pub const CONTROLLER_HIDDEN: [usize; 3] = [32, 32, 32];

/// Initial controller output bias; `softplus` of it is the untrained step size.
pub const CONTROLLER_INIT_LR: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct UnrolledProblem {
    inner: QuadraticProblem,
    /// Eigenvalues of the inner Hessian `AᵀA/M`, ascending.
    features: Vector,
    optimal_lr: f64,
    controller: Mlp,
    horizon: usize,
    start: Vector,
}

impl UnrolledProblem {
    pub fn new(seed: u64) -> Result<Self, ProblemError> {
        let inner = QuadraticProblem::new(INNER_ROWS, INNER_COLS, seed)?;
        let mut rng = StreamKey::new(seed, Purpose::ModelInit).rng();
        let sizes: Vec<usize> = std::iter::once(INNER_COLS)
            .chain(CONTROLLER_HIDDEN)
            .chain(std::iter::once(1))
            .collect();
        let mut controller = Mlp::new(&sizes, OutputTransform::Softplus, &mut rng);
        controller.output_bias_mut()[0] = softplus_inverse(CONTROLLER_INIT_LR);
        Self::from_parts(inner, controller)
    }

    pub fn from_parts(inner: QuadraticProblem, controller: Mlp) -> Result<Self, ProblemError> {
        if controller.input_dim() != inner.dim() || controller.output_dim() != 1 {
            return Err(ProblemError::DimensionMismatch {
                expected: inner.dim(),
                actual: controller.input_dim(),
            });
        }
        let mut eig: Vec<f64> = inner
            .hessian()
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        eig.sort_by(f64::total_cmp);
        let m = inner.rows() as f64;
        // eigenvalues of AᵀA are M times those of the Hessian
        let optimal_lr = 2.0 * m / (m * eig[0] + m * eig[eig.len() - 1]);
        let start = Vector::zeros(inner.dim());
        Ok(Self {
            features: Vector::from_vec(eig),
            optimal_lr,
            controller,
            horizon: FULL_HORIZON,
            inner,
            start,
        })
    }

    pub fn inner(&self) -> &QuadraticProblem {
        &self.inner
    }

    pub fn controller(&self) -> &Mlp {
        &self.controller
    }

    pub fn features(&self) -> &Vector {
        &self.features
    }

    /// `2M / (λ_min + λ_max)` over the eigenvalues of `AᵀA`.
    pub fn optimal_lr(&self) -> f64 {
        self.optimal_lr
    }

    pub fn initial_params(&self) -> Vector {
        self.controller.params().clone()
    }

    pub fn num_params(&self) -> usize {
        self.controller.num_params()
    }

    /// Step size predicted by the controller.
    pub fn predicted_lr(&self, params: &Vector) -> f64 {
        self.controller
            .forward_with(params, &self.features)
            .map(|v| v[0])
            .unwrap_or(f64::NAN)
    }

    pub fn lr_error(&self, params: &Vector) -> f64 {
        (self.predicted_lr(params) - self.optimal_lr).abs()
    }

    /// Inner loss after `steps` gradient steps with a fixed step size.
    pub fn loss_after(&self, lr: f64, steps: usize) -> f64 {
        let mut x = self.start.clone();
        for _ in 0..steps {
            let g = self.inner_grad(&x);
            x.axpy(-lr, &g, 1.0);
        }
        self.inner.residual_loss(&x)
    }

    fn inner_grad(&self, x: &Vector) -> Vector {
        let a = self.inner.design();
        a.tr_mul(&(a * x - self.inner.target())) / self.inner.rows() as f64
    }

    /// Meta-loss over `steps` unrolled steps; non-finite when the inner
    /// iteration diverges.
    pub fn meta_loss(&self, params: &Vector, steps: usize) -> f64 {
        self.loss_after(self.predicted_lr(params), steps)
    }

    /// Exact gradient of the one-step meta-loss with respect to the
    /// controller parameters: `dL/dη = −g₀ᵀ∇f(x₀ − ηg₀)` chained through the
    /// controller.
    pub fn truncated_grad(&self, params: &Vector) -> Vector {
        let lr = self.predicted_lr(params);
        let g0 = self.inner_grad(&self.start);
        let x1 = &self.start - &g0 * lr;
        let dl_dlr = -g0.dot(&self.inner_grad(&x1));
        self.controller
            .backward_with(params, &self.features, &Vector::from_element(1, dl_dlr))
            .map(|(gp, _)| gp)
            .expect("controller dimensions are fixed at construction")
    }

    /// Exact gradient of the `steps`-step meta-loss, by forward-mode
    /// differentiation of the inner trajectory with respect to the step size.
    pub fn meta_grad(&self, params: &Vector, steps: usize) -> Vector {
        let lr = self.predicted_lr(params);
        let h = self.inner.hessian();
        let mut x = self.start.clone();
        let mut dx = Vector::zeros(x.len());
        for _ in 0..steps {
            let g = self.inner_grad(&x);
            // d/dη [x − η·∇f(x)] = dx − ∇f(x) − η·H·dx
            dx = &dx - &g - h * &dx * lr;
            x.axpy(-lr, &g, 1.0);
        }
        let dl_dlr = self.inner_grad(&x).dot(&dx);
        self.controller
            .backward_with(params, &self.features, &Vector::from_element(1, dl_dlr))
            .map(|(gp, _)| gp)
            .expect("controller dimensions are fixed at construction")
    }

    /// Derivative of the one-step meta-loss with respect to the step size.
    pub fn truncated_lr_derivative(&self, lr: f64) -> f64 {
        let g0 = self.inner_grad(&self.start);
        -g0.dot(&self.inner_grad(&(&self.start - &g0 * lr)))
    }

    /// Horizon used when the problem is evaluated as an [`Objective`].
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        assert!(horizon >= 1);
        self.horizon = horizon;
        self
    }

    /// Lowest meta-loss attainable: the inner optimum.
    pub fn optimal_value(&self) -> f64 {
        self.inner.optimal_value()
    }

    /// Controller with every weight zero and the given output bias; mostly for tests.
    pub fn constant_params(&self, lr: f64) -> Vector {
        let mut c = self.controller.clone();
        c.params_mut().fill(0.0);
        c.output_bias_mut()[0] = softplus_inverse(lr);
        c.params().clone()
    }
}

impl Objective for UnrolledProblem {
    fn dim(&self) -> usize {
        self.controller.num_params()
    }

    fn eval(&self, params: &Vector) -> f64 {
        self.meta_loss(params, self.horizon)
    }
}

/// Identity-design variant for sanity checks: `A = I` padded with zero rows.
pub fn identity_inner(rows: usize, cols: usize, seed: u64) -> Result<QuadraticProblem, ProblemError> {
    let mut design = Matrix::zeros(rows, cols);
    for i in 0..cols.min(rows) {
        design[(i, i)] = 1.0;
    }
    let mut rng = StreamKey::new(seed, Purpose::ProblemInit).rng();
    let target = crate::rng::gaussian_vector(&mut rng, rows);
    QuadraticProblem::from_parts(design, target, crate::rng::unit_vector(&mut rng, cols), seed)
}
