//! Experiment orchestration.
//!
//! A run alternates surrogate query, subspace update, ES estimate and
//! optimizer step. Problems are seen through two traits: [`UpdateView`], the
//! only thing update rules receive, and [`MeasurementView`], which exposes the
//! true gradient for logging. Seeds run in parallel and are merged in seed
//! order.

mod aggregate;
mod output;
mod setups;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::estimator::{estimate_gradient_observed, EstimateError, Objective};
use crate::optim::{Optimizer, OptimizerError};
use crate::problems::ProblemError;
use crate::rng::{Purpose, StreamKey};
use crate::subspace::{basis_of, correlation, SubspaceBuffer, SubspaceError};
use crate::types::{ConfigError, RunRecord, SearchConfig, SubspaceBasis};
use crate::Vector;

pub use aggregate::{aggregate, AggregateResult, AggregateRow, Metric};
pub use output::{
    emit_csv, emit_regimes_csv, emit_surface_csv, parse_csv, render_csv, CSV_HEADER, REGIMES_HEADER, SURFACE_HEADER,
};
pub use setups::{QuadraticSetup, SyntheticSetup, UnrolledSetup};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Subspace(#[from] SubspaceError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error("non-finite loss at iteration {0}")]
    NonFinite(usize),
    #[error("no completed seeds to aggregate")]
    NoCompletedSeeds,
    #[error("nothing to write")]
    EmptyResult,
    #[error("malformed CSV: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

macro_rules! named_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = HarnessError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.name() == s)
                    .ok_or_else(|| HarnessError::InvalidSpec(format!("unknown {} `{s}`", stringify!($name))))
            }
        }
    };
}

named_enum!(Experiment {
    Quadratic => "quadratic",
    Unrolled => "unrolled",
    Synthetic => "synthetic",
    BiasVarianceSurface => "bias_variance_surface",
    HyperparamRegimes => "hyperparam_regimes",
});

named_enum!(Algorithm {
    GuidedEs => "guided_es",
    VanillaEs => "vanilla_es",
    SgdSurrogate => "sgd_surrogate",
    AdamSurrogate => "adam_surrogate",
});

impl Algorithm {
    pub fn is_es(self) -> bool {
        matches!(self, Algorithm::GuidedEs | Algorithm::VanillaEs)
    }
}

/// What update rules may use: function values and surrogate gradients.
pub trait UpdateView: Objective {
    fn initial_point(&self) -> Vector;
    fn surrogate_grad(&mut self, x: &Vector, iteration: u64) -> Result<Vector, HarnessError>;

    /// Whether ES evaluations should be passed to [`UpdateView::observe`].
    fn wants_observations(&self) -> bool {
        false
    }

    fn observe(&mut self, _x: &Vector, _value: f64) {}

    /// Called once per iteration with the iterate the iteration started from.
    fn end_iteration(&mut self, _x: &Vector, _iteration: u64) -> Result<(), HarnessError> {
        Ok(())
    }
}

/// Values logged after each iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub loss: f64,
    pub suboptimality: f64,
    pub true_grad: Vector,
    pub lr_error: Option<f64>,
}

/// Logging-only access, including the true gradient.
pub trait MeasurementView {
    fn measure(&self, x: &Vector) -> Measurement;
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    pub iterations: usize,
    pub learning_rate: f64,
    /// `param_dim` is filled in from the problem when the run starts.
    pub cfg: SearchConfig,
    /// Problem size override: `N` for the quadratic (with `M = 2N`), `n` for
    /// the synthetic problem. The unrolled problem has a fixed size.
    pub dim: Option<usize>,
}

pub const DEFAULT_SEEDS: usize = 10;
pub const QUADRATIC_ITERATIONS: usize = 10_000;
pub const DEFAULT_ITERATIONS: usize = 2_000;

impl ExperimentSpec {
    /// Protocol defaults for an experiment/algorithm pair.
    pub fn defaults(experiment: Experiment, algorithm: Algorithm) -> Result<Self, HarnessError> {
        let (iterations, learning_rate, cfg) = match experiment {
            Experiment::Quadratic => (
                QUADRATIC_ITERATIONS,
                QuadraticSetup::learning_rate(algorithm),
                QuadraticSetup::config(),
            ),
            Experiment::Unrolled => (
                DEFAULT_ITERATIONS,
                UnrolledSetup::learning_rate(algorithm),
                UnrolledSetup::config(),
            ),
            Experiment::Synthetic => (
                DEFAULT_ITERATIONS,
                SyntheticSetup::learning_rate(algorithm),
                SyntheticSetup::config(),
            ),
            other => {
                return Err(HarnessError::InvalidSpec(format!(
                    "`{other}` is an analysis export, not a run"
                )));
            }
        };
        Ok(Self {
            experiment,
            algorithm,
            seeds: (0..DEFAULT_SEEDS as u64).collect(),
            iterations,
            learning_rate,
            cfg,
            dim: None,
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.seeds.is_empty() {
            return Err(HarnessError::InvalidSpec("at least one seed is required".into()));
        }
        if self.iterations == 0 {
            return Err(HarnessError::InvalidSpec("iterations must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(HarnessError::InvalidSpec(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if matches!(
            self.experiment,
            Experiment::BiasVarianceSurface | Experiment::HyperparamRegimes
        ) {
            return Err(HarnessError::InvalidSpec(format!(
                "`{}` is an analysis export, not a run",
                self.experiment
            )));
        }
        Ok(())
    }
}

/// Trace of one seed. `failure` is set when the run stopped early.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub records: Vec<RunRecord>,
    pub failure: Option<String>,
}

impl SeedRun {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Runs every seed of `spec`, in parallel, returned in seed order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<SeedRun>, HarnessError> {
    spec.validate()?;
    Ok(spec.seeds.par_iter().map(|&seed| run_seed(spec, seed)).collect())
}

/// One seed; errors during the run become the failure marker.
pub fn run_seed(spec: &ExperimentSpec, seed: u64) -> SeedRun {
    let mut records = Vec::with_capacity(spec.iterations + 1);
    let result = match spec.experiment {
        Experiment::Quadratic => {
            QuadraticSetup::build(spec, seed).and_then(|mut p| drive(spec, seed, &mut p, &mut records))
        }
        Experiment::Unrolled => {
            UnrolledSetup::build(spec, seed).and_then(|mut p| drive(spec, seed, &mut p, &mut records))
        }
        Experiment::Synthetic => {
            SyntheticSetup::build(spec, seed).and_then(|mut p| drive(spec, seed, &mut p, &mut records))
        }
        other => Err(HarnessError::InvalidSpec(format!("`{other}` is not a run"))),
    };
    SeedRun {
        seed,
        records,
        failure: result.err().map(|e| e.to_string()),
    }
}

/// Per-run state owned by the update path.
struct UpdateState {
    cfg: SearchConfig,
    algorithm: Algorithm,
    buffer: SubspaceBuffer,
    basis: SubspaceBasis,
    optimizer: Optimizer,
    perturbation: StreamKey,
    function_evals: usize,
    surrogate_grad_evals: usize,
    /// Last surrogate for the first-order baselines, kept for measurement.
    last_surrogate: Option<Vector>,
}

impl UpdateState {
    fn new(spec: &ExperimentSpec, dim: usize, seed: u64) -> Result<Self, HarnessError> {
        let mut cfg = spec.cfg;
        cfg.param_dim = dim;
        if spec.algorithm == Algorithm::VanillaEs {
            cfg.alpha = 1.0;
        }
        let cfg = cfg.validate()?;
        let optimizer = match spec.algorithm {
            Algorithm::AdamSurrogate => Optimizer::adam(spec.learning_rate, dim),
            _ => Optimizer::sgd(spec.learning_rate),
        };
        Ok(Self {
            cfg,
            algorithm: spec.algorithm,
            buffer: SubspaceBuffer::new(cfg.subspace_dim, dim),
            basis: SubspaceBasis::empty(dim, cfg.subspace_dim),
            optimizer,
            perturbation: StreamKey::new(seed, Purpose::Perturbation),
            function_evals: 0,
            surrogate_grad_evals: 0,
            last_surrogate: None,
        })
    }

    /// One iteration. Only the update view of the problem is reachable here.
    fn step<P: UpdateView + ?Sized>(
        &mut self,
        problem: &mut P,
        x: &mut Vector,
        iteration: u64,
    ) -> Result<(), HarnessError> {
        let start = x.clone();
        match self.algorithm {
            Algorithm::GuidedEs | Algorithm::VanillaEs => {
                let mut cfg = self.cfg;
                if self.algorithm == Algorithm::GuidedEs {
                    let surrogate = problem.surrogate_grad(x, iteration)?;
                    self.surrogate_grad_evals += 1;
                    if self.buffer.push(surrogate)? {
                        self.basis = basis_of(&self.buffer)?;
                    }
                    if self.basis.effective_rank() == 0 {
                        // nothing to guide with yet: isotropic step
                        cfg.alpha = 1.0;
                    }
                }
                let mut seen = Vec::new();
                let wants = problem.wants_observations();
                let estimate = estimate_gradient_observed(
                    &*problem,
                    x,
                    &cfg,
                    &self.basis,
                    self.perturbation.at(iteration),
                    |p, v| {
                        if wants {
                            seen.push((p.clone(), v));
                        }
                    },
                )?;
                self.function_evals += estimate.function_evals;
                for (p, v) in &seen {
                    problem.observe(p, *v);
                }
                self.optimizer.step(x, &estimate.direction)?;
            }
            Algorithm::SgdSurrogate | Algorithm::AdamSurrogate => {
                let surrogate = problem.surrogate_grad(x, iteration)?;
                self.surrogate_grad_evals += 1;
                self.optimizer.step(x, &surrogate)?;
                self.last_surrogate = Some(surrogate);
            }
        }
        problem.end_iteration(&start, iteration)
    }

    /// Quality of the direction(s) used by the last step against `grad`.
    fn correlation(&self, grad: &Vector) -> Result<Option<f64>, HarnessError> {
        Ok(match self.algorithm {
            Algorithm::GuidedEs => Some(correlation(&self.basis, grad)?.norm),
            Algorithm::VanillaEs => None,
            Algorithm::SgdSurrogate | Algorithm::AdamSurrogate => self.last_surrogate.as_ref().map(|s| {
                let denom = s.norm() * grad.norm();
                if denom > 0.0 {
                    (s.dot(grad) / denom).abs()
                } else {
                    0.0
                }
            }),
        })
    }
}

/// Record 0 is the starting point; record `t` follows update `t`, and its
/// correlation compares the guidance used in that update with the true
/// gradient at the point it was taken.
fn drive<P: UpdateView + MeasurementView>(
    spec: &ExperimentSpec,
    seed: u64,
    problem: &mut P,
    records: &mut Vec<RunRecord>,
) -> Result<(), HarnessError> {
    let mut x = problem.initial_point();
    let mut state = UpdateState::new(spec, x.len(), seed)?;
    let record = |m: &Measurement, state: &UpdateState, iteration: usize, correlation: Option<f64>| {
        if !m.loss.is_finite() {
            return Err(HarnessError::NonFinite(iteration));
        }
        Ok(RunRecord {
            iteration,
            loss: m.loss,
            suboptimality: m.suboptimality,
            correlation,
            lr_error: m.lr_error,
            function_evals: state.function_evals,
            surrogate_grad_evals: state.surrogate_grad_evals,
            seed,
        })
    };
    let mut current = problem.measure(&x);
    records.push(record(&current, &state, 0, None)?);
    for t in 1..=spec.iterations {
        state.step(problem, &mut x, (t - 1) as u64)?;
        let correlation = state.correlation(&current.true_grad)?;
        current = problem.measure(&x);
        records.push(record(&current, &state, t, correlation)?);
    }
    Ok(())
}
