//! Antithetic finite-difference descent direction
//!
//! ```text
//! g = β/(2σ²P) · Σᵢ εᵢ·(f(x+εᵢ) − f(x−εᵢ)),   εᵢ ~ N(0, σ²Σ)
//! ```
//!
//! and its expectation `β·Σ·∇f(x)` for objectives that are quadratic around `x`.

use rayon::prelude::*;
use thiserror::Error;

use crate::rng::StreamKey;
use crate::sampler::{sample_perturbation, SamplerError};
use crate::types::{GradientEstimate, SearchConfig, SubspaceBasis};
use crate::Vector;

/// A black-box scalar objective.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &Vector) -> f64;

    /// Whether `eval` may be called from several threads at once.
    fn concurrent(&self) -> bool {
        true
    }
}

impl<F> Objective for (usize, F)
where
    F: Fn(&Vector) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.0
    }

    fn eval(&self, x: &Vector) -> f64 {
        (self.1)(x)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("objective returned {value} at perturbation {pair} ({sign})")]
    NonFinite { pair: usize, sign: char, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// `ε·(f(x+ε) − f(x−ε))`, the unscaled contribution of one pair.
pub fn pair_contribution(f_plus: f64, f_minus: f64, eps: &Vector) -> Vector {
    eps * (f_plus - f_minus)
}

struct PairEval {
    eps: Vector,
    plus: Vector,
    minus: Vector,
    f_plus: f64,
    f_minus: f64,
}

fn evaluate_pair<F: Objective + ?Sized>(
    f: &F,
    x: &Vector,
    cfg: &SearchConfig,
    basis: &SubspaceBasis,
    key: StreamKey,
    pair: usize,
) -> Result<PairEval, EstimateError> {
    let mut rng = key.index(pair as u64).rng();
    let eps = sample_perturbation(cfg, basis, &mut rng)?;
    let plus = x + &eps;
    let minus = x - &eps;
    let f_plus = f.eval(&plus);
    if !f_plus.is_finite() {
        return Err(EstimateError::NonFinite {
            pair,
            sign: '+',
            value: f_plus,
        });
    }
    let f_minus = f.eval(&minus);
    if !f_minus.is_finite() {
        return Err(EstimateError::NonFinite {
            pair,
            sign: '-',
            value: f_minus,
        });
    }
    Ok(PairEval {
        eps,
        plus,
        minus,
        f_plus,
        f_minus,
    })
}

/// Guided ES estimate at `x`.
///
/// Pair `i` draws its perturbation from `key.index(i)`. Evaluations run in
/// parallel when the objective allows it; the reduction is always in pair
/// order, so the result depends only on the key.
pub fn estimate_gradient<F: Objective + ?Sized>(
    f: &F,
    x: &Vector,
    cfg: &SearchConfig,
    basis: &SubspaceBasis,
    key: StreamKey,
) -> Result<GradientEstimate, EstimateError> {
    estimate_gradient_observed(f, x, cfg, basis, key, |_, _| {})
}

/// Like [`estimate_gradient`], additionally reporting each evaluated point
/// and its value to `observe`: `x+ε₀, x−ε₀, x+ε₁, ...`.
pub fn estimate_gradient_observed<F, O>(
    f: &F,
    x: &Vector,
    cfg: &SearchConfig,
    basis: &SubspaceBasis,
    key: StreamKey,
    mut observe: O,
) -> Result<GradientEstimate, EstimateError>
where
    F: Objective + ?Sized,
    O: FnMut(&Vector, f64),
{
    if x.len() != cfg.param_dim || f.dim() != cfg.param_dim {
        return Err(EstimateError::DimensionMismatch {
            expected: cfg.param_dim,
            actual: if x.len() != cfg.param_dim { x.len() } else { f.dim() },
        });
    }
    let evals: Vec<PairEval> = if f.concurrent() && cfg.pairs > 1 {
        (0..cfg.pairs)
            .into_par_iter()
            .map(|i| evaluate_pair(f, x, cfg, basis, key, i))
            .collect::<Result<_, _>>()?
    } else {
        (0..cfg.pairs)
            .map(|i| evaluate_pair(f, x, cfg, basis, key, i))
            .collect::<Result<_, _>>()?
    };

    let mut sum = Vector::zeros(cfg.param_dim);
    for e in &evals {
        sum += pair_contribution(e.f_plus, e.f_minus, &e.eps);
        observe(&e.plus, e.f_plus);
        observe(&e.minus, e.f_minus);
    }
    let scale = cfg.beta / (2.0 * cfg.sigma * cfg.sigma * cfg.pairs as f64);
    Ok(GradientEstimate {
        direction: sum * scale,
        function_evals: 2 * cfg.pairs,
        surrogate_grad_evals: 0,
    })
}

/// `β·Σ·∇f = β·((α/n)·∇f + ((1−α)/k)·U·Uᵀ·∇f)`, with `k` the effective rank.
pub fn expected_update(cfg: &SearchConfig, basis: &SubspaceBasis, grad: &Vector) -> Result<Vector, EstimateError> {
    let n = cfg.param_dim;
    for actual in [grad.len(), basis.dim()] {
        if actual != n {
            return Err(EstimateError::DimensionMismatch { expected: n, actual });
        }
    }
    let mut out = grad * (cfg.beta * cfg.alpha / n as f64);
    let rank = basis.effective_rank();
    if cfg.alpha < 1.0 {
        if rank == 0 {
            return Err(SamplerError::DegenerateBasis { alpha: cfg.alpha }.into());
        }
        let coeffs = basis.coefficients(grad);
        out.gemv(
            cfg.beta * (1.0 - cfg.alpha) / rank as f64,
            basis.columns(),
            &coeffs,
            1.0,
        );
    }
    Ok(out)
}
