//! Quadratic target whose surrogate gradient comes from a learned model.
//!
//! A scalar network `M(x; θ)` is fit online to observed values of
//! `f(x) = ½‖x − x*‖²`, and `∇ₓM` serves as the surrogate gradient. Early on
//! the model is untrained and the surrogate is close to random.

use std::collections::VecDeque;

use rand::Rng;

use crate::estimator::Objective;
use crate::optim::Optimizer;
use crate::rng::{Purpose, StreamKey};
use crate::{Matrix, Vector};

use super::mlp::{Mlp, OutputTransform};
use super::ProblemError;

pub const DEFAULT_DIM: usize = 30;
pub const REPLAY_CAPACITY: usize = 8192;
pub const BATCH_SIZE: usize = 512;
pub const MODEL_LEARNING_RATE: f64 = 1e-4;
pub const MODEL_HIDDEN: [usize; 2] = [64, 64];

/// FIFO store of the most recent `(x, f(x))` observations.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<(Vector, f64)>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, x: Vector, value: f64) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((x, value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Oldest entry first.
    pub fn iter(&self) -> impl Iterator<Item = &(Vector, f64)> {
        self.entries.iter()
    }

    /// Uniform draw with replacement; inputs as columns. `None` when empty.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, size: usize) -> Option<(Matrix, Vector)> {
        let first = self.entries.front()?;
        let dim = first.0.len();
        let mut inputs = Matrix::zeros(dim, size);
        let mut targets = Vector::zeros(size);
        for j in 0..size {
            let (x, v) = &self.entries[rng.random_range(0..self.entries.len())];
            inputs.set_column(j, x);
            targets[j] = *v;
        }
        Some((inputs, targets))
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticGradProblem {
    target: Vector,
    model: Mlp,
    model_optimizer: Optimizer,
    buffer: ReplayBuffer,
    seed: u64,
}

impl SyntheticGradProblem {
    /// `x*` uniform on `[−1, 1]ⁿ`; model `[n, 64, 64, 1]` with identity output.
    pub fn new(dim: usize, seed: u64) -> Self {
        let mut rng = StreamKey::new(seed, Purpose::ProblemInit).rng();
        let target = Vector::from_iterator(dim, (0..dim).map(|_| rng.random_range(-1.0..=1.0)));
        let mut model_rng = StreamKey::new(seed, Purpose::ModelInit).rng();
        let sizes: Vec<usize> = std::iter::once(dim)
            .chain(MODEL_HIDDEN)
            .chain(std::iter::once(1))
            .collect();
        let model = Mlp::new(&sizes, OutputTransform::Identity, &mut model_rng);
        let model_optimizer = Optimizer::adam(MODEL_LEARNING_RATE, model.num_params());
        Self {
            target,
            model,
            model_optimizer,
            buffer: ReplayBuffer::new(REPLAY_CAPACITY),
            seed,
        }
    }

    pub fn dim(&self) -> usize {
        self.target.len()
    }

    pub fn target(&self) -> &Vector {
        &self.target
    }

    pub fn model(&self) -> &Mlp {
        &self.model
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn loss(&self, x: &Vector) -> f64 {
        0.5 * (x - &self.target).norm_squared()
    }

    pub fn true_grad(&self, x: &Vector) -> Vector {
        x - &self.target
    }

    /// `∇ₓM(x; θ)`.
    pub fn surrogate_grad(&self, x: &Vector) -> Result<Vector, ProblemError> {
        self.model
            .backward(x, &Vector::from_element(1, 1.0))
            .map(|(_, input)| input)
    }

    /// Records one true function evaluation for model training.
    pub fn observe(&mut self, x: Vector, value: f64) {
        self.buffer.push(x, value);
    }

    /// Mean squared error of the model on the given batch.
    pub fn model_mse(&self, inputs: &Matrix, targets: &Vector) -> Result<f64, ProblemError> {
        let out = self.model.forward_batch(inputs)?;
        Ok(out
            .row(0)
            .iter()
            .zip(targets.iter())
            .map(|(m, t)| (m - t).powi(2))
            .sum::<f64>()
            / targets.len() as f64)
    }

    /// One Adam step on the MSE of a replay batch drawn from the stream for
    /// `iteration`. Returns the batch loss before the step, or `None` when the
    /// buffer is empty.
    pub fn model_update(&mut self, iteration: u64) -> Result<Option<f64>, ProblemError> {
        let mut rng = StreamKey::new(self.seed, Purpose::ModelBatch).at(iteration).rng();
        let Some((inputs, targets)) = self.buffer.sample(&mut rng, BATCH_SIZE) else {
            return Ok(None);
        };
        let out = self.model.forward_batch(&inputs)?;
        let scale = 2.0 / targets.len() as f64;
        let residual = Matrix::from_fn(1, targets.len(), |_, j| out[(0, j)] - targets[j]);
        let mse = residual.norm_squared() / targets.len() as f64;
        let grads = self
            .model
            .backward_batch_with(self.model.params(), &inputs, &(residual * scale))?;
        let mut params = self.model.params().clone();
        self.model_optimizer
            .step(&mut params, &grads.params)
            .map_err(|_| ProblemError::DimensionMismatch {
                expected: params.len(),
                actual: grads.params.len(),
            })?;
        self.model.set_params(params)?;
        Ok(Some(mse))
    }
}

impl Objective for SyntheticGradProblem {
    fn dim(&self) -> usize {
        self.target.len()
    }

    fn eval(&self, x: &Vector) -> f64 {
        self.loss(x)
    }
}
