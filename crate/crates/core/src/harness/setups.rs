//! Problem wiring and protocol defaults for each experiment.

use super::{Algorithm, ExperimentSpec, HarnessError, Measurement, MeasurementView, UpdateView};
use crate::estimator::Objective;
use crate::problems::synthetic::{self, SyntheticGradProblem};
use crate::problems::{QuadraticProblem, UnrolledProblem};
use crate::rng::{gaussian_vector, Purpose, StreamKey};
use crate::types::SearchConfig;
use crate::Vector;

/// Linear regression with a biased surrogate gradient, `N = 1000`, `M = 2N`.
pub struct QuadraticSetup {
    problem: QuadraticProblem,
}

impl QuadraticSetup {
    pub const DIM: usize = 1000;

    pub fn config() -> SearchConfig {
        SearchConfig::new(Self::DIM, 10).with_sigma(0.1).with_pairs(1)
    }

    pub fn learning_rate(algorithm: Algorithm) -> f64 {
        match algorithm {
            Algorithm::GuidedEs | Algorithm::VanillaEs => 0.2,
            Algorithm::SgdSurrogate => 5e-3,
            Algorithm::AdamSurrogate => 1e-2,
        }
    }

    pub fn build(spec: &ExperimentSpec, seed: u64) -> Result<Self, HarnessError> {
        let n = spec.dim.unwrap_or(Self::DIM);
        Ok(Self {
            problem: QuadraticProblem::new(2 * n, n, seed)?,
        })
    }
}

impl Objective for QuadraticSetup {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn eval(&self, x: &Vector) -> f64 {
        self.problem.loss(x)
    }
}

impl UpdateView for QuadraticSetup {
    fn initial_point(&self) -> Vector {
        Vector::zeros(self.problem.dim())
    }

    fn surrogate_grad(&mut self, x: &Vector, iteration: u64) -> Result<Vector, HarnessError> {
        Ok(self.problem.surrogate_grad(x, iteration))
    }
}

impl MeasurementView for QuadraticSetup {
    fn measure(&self, x: &Vector) -> Measurement {
        let (suboptimality, true_grad) = self.problem.suboptimality_and_grad(x);
        Measurement {
            loss: self.problem.optimal_value() + suboptimality,
            suboptimality,
            true_grad,
            lr_error: None,
        }
    }
}

/// Learned learning-rate controller trained through an unrolled inner loop.
pub struct UnrolledSetup {
    problem: UnrolledProblem,
}

impl UnrolledSetup {
    pub fn config() -> SearchConfig {
        SearchConfig::new(1, 1).with_sigma(0.01).with_pairs(1)
    }

    pub fn learning_rate(algorithm: Algorithm) -> f64 {
        match algorithm {
            Algorithm::GuidedEs => 0.5,
            Algorithm::VanillaEs => 10.0,
            Algorithm::SgdSurrogate => 0.3,
            Algorithm::AdamSurrogate => 1e-3,
        }
    }

    pub fn build(_spec: &ExperimentSpec, seed: u64) -> Result<Self, HarnessError> {
        Ok(Self {
            problem: UnrolledProblem::new(seed)?,
        })
    }
}

impl Objective for UnrolledSetup {
    fn dim(&self) -> usize {
        self.problem.num_params()
    }

    fn eval(&self, params: &Vector) -> f64 {
        self.problem.eval(params)
    }
}

impl UpdateView for UnrolledSetup {
    fn initial_point(&self) -> Vector {
        self.problem.initial_params()
    }

    fn surrogate_grad(&mut self, params: &Vector, _iteration: u64) -> Result<Vector, HarnessError> {
        Ok(self.problem.truncated_grad(params))
    }
}

impl MeasurementView for UnrolledSetup {
    fn measure(&self, params: &Vector) -> Measurement {
        let loss = self.problem.eval(params);
        Measurement {
            loss,
            suboptimality: (loss - self.problem.optimal_value()).max(0.0),
            true_grad: self.problem.meta_grad(params, self.problem.horizon()),
            lr_error: Some(self.problem.lr_error(params)),
        }
    }
}

/// Quadratic target with a model-generated surrogate gradient.
pub struct SyntheticSetup {
    problem: SyntheticGradProblem,
    /// Per-coordinate spread of the extra training points drawn for the
    /// first-order baselines, which produce no function evaluations of their own.
    sample_spread: Option<f64>,
    seed: u64,
}

impl SyntheticSetup {
    pub const DIM: usize = synthetic::DEFAULT_DIM;
    /// Points drawn around the iterate per iteration for the first-order baselines.
    pub const BASELINE_SAMPLES: usize = 2;

    pub fn config() -> SearchConfig {
        SearchConfig::new(Self::DIM, 1).with_sigma(0.1).with_pairs(1)
    }

    pub fn learning_rate(algorithm: Algorithm) -> f64 {
        match algorithm {
            Algorithm::GuidedEs | Algorithm::VanillaEs => 0.5,
            Algorithm::SgdSurrogate => 0.1,
            Algorithm::AdamSurrogate => 1e-2,
        }
    }

    pub fn build(spec: &ExperimentSpec, seed: u64) -> Result<Self, HarnessError> {
        let sample_spread = (!spec.algorithm.is_es()).then_some(spec.cfg.sigma);
        Ok(Self {
            problem: SyntheticGradProblem::new(spec.dim.unwrap_or(Self::DIM), seed),
            sample_spread,
            seed,
        })
    }
}

impl Objective for SyntheticSetup {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn eval(&self, x: &Vector) -> f64 {
        self.problem.loss(x)
    }
}

impl UpdateView for SyntheticSetup {
    fn initial_point(&self) -> Vector {
        Vector::zeros(self.problem.dim())
    }

    fn surrogate_grad(&mut self, x: &Vector, _iteration: u64) -> Result<Vector, HarnessError> {
        Ok(self.problem.surrogate_grad(x)?)
    }

    fn wants_observations(&self) -> bool {
        true
    }

    fn observe(&mut self, x: &Vector, value: f64) {
        self.problem.observe(x.clone(), value);
    }

    fn end_iteration(&mut self, x: &Vector, iteration: u64) -> Result<(), HarnessError> {
        if let Some(spread) = self.sample_spread {
            let mut rng = StreamKey::new(self.seed, Purpose::ModelData).at(iteration).rng();
            for _ in 0..Self::BASELINE_SAMPLES {
                let z = gaussian_vector(&mut rng, x.len());
                let point = x + z * spread;
                let value = self.problem.loss(&point);
                self.problem.observe(point, value);
            }
        }
        self.problem.model_update(iteration)?;
        Ok(())
    }
}

impl MeasurementView for SyntheticSetup {
    fn measure(&self, x: &Vector) -> Measurement {
        let loss = self.problem.loss(x);
        Measurement {
            loss,
            suboptimality: loss,
            true_grad: self.problem.true_grad(x),
            lr_error: None,
        }
    }
}
