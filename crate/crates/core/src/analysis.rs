//! Closed-form error analysis of the guided estimator.
//!
//! For a locally quadratic objective and one antithetic pair, the squared bias
//! and total variance of the estimate, both normalized by `‖∇f‖²`, depend only
//! on `(α, β, k, n)` and the subspace correlation `‖ρ‖₂`. Their sum is the
//! expected normalized squared error, which is quadratic in
//! `θ = (αβ, (1−α)β)`; minimizing it over `θ ⪰ 0` gives the optimal
//! hyperparameters.
//!
//! The Monte Carlo routines at the bottom measure the same quantities
//! empirically and serve as the independent check on the formulas.

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use thiserror::Error;

use crate::estimator::{estimate_gradient, EstimateError, Objective};
use crate::rng::{Purpose, StreamKey};
use crate::subspace::{correlation, SubspaceError};
use crate::types::{ErrorProfile, SearchConfig, SubspaceBasis};
use crate::Vector;

/// Fewer samples than this are too noisy to be useful as an oracle.
pub const MIN_MONTE_CARLO_SAMPLES: usize = 1_000;

const MC_CHUNK: usize = 4_096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("{field} out of range: {value}")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("need k <= n, got k = {k}, n = {n}")]
    SubspaceExceedsDim { k: usize, n: usize },
    #[error("{0} samples requested; at least {MIN_MONTE_CARLO_SAMPLES} required")]
    TooFewSamples(usize),
    #[error("true gradient is zero")]
    ZeroGradient,
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Subspace(#[from] SubspaceError),
}

fn check_dims(k: usize, n: usize) -> Result<(), AnalysisError> {
    if k == 0 {
        return Err(AnalysisError::OutOfRange { field: "k", value: 0.0 });
    }
    if k > n {
        return Err(AnalysisError::SubspaceExceedsDim { k, n });
    }
    Ok(())
}

fn check_unit(field: &'static str, value: f64) -> Result<(), AnalysisError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(AnalysisError::OutOfRange { field, value })
    }
}

fn check_inputs(alpha: f64, beta: f64, k: usize, n: usize, rho_sq: f64) -> Result<(), AnalysisError> {
    check_dims(k, n)?;
    check_unit("alpha", alpha)?;
    check_unit("rho_sq", rho_sq)?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(AnalysisError::OutOfRange {
            field: "beta",
            value: beta,
        });
    }
    Ok(())
}

/// `b̃ = (βα/n − 1)² + (β²(1−α)²/k² + 2β(1−α)/k·(βα/n − 1))·‖ρ‖²`
pub fn normalized_bias(alpha: f64, beta: f64, k: usize, n: usize, rho_sq: f64) -> Result<f64, AnalysisError> {
    check_inputs(alpha, beta, k, n, rho_sq)?;
    let (k, n) = (k as f64, n as f64);
    let full = beta * alpha / n - 1.0;
    let sub = beta * (1.0 - alpha) / k;
    // (sub² + 2·sub·full)·ρ² + full² regrouped as a sum of squares
    Ok(full * full * (1.0 - rho_sq) + (sub + full) * (sub + full) * rho_sq)
}

/// `ṽ = β²(α²/n² + α/n) + β²((1−α)²/k² + 2α(1−α)/(kn) + (1−α)/k)·‖ρ‖²`
pub fn normalized_variance(alpha: f64, beta: f64, k: usize, n: usize, rho_sq: f64) -> Result<f64, AnalysisError> {
    check_inputs(alpha, beta, k, n, rho_sq)?;
    let (k, n) = (k as f64, n as f64);
    let a = 1.0 - alpha;
    let full = alpha * alpha / (n * n) + alpha / n;
    let sub = a * a / (k * k) + 2.0 * alpha * a / (k * n) + a / k;
    Ok(beta * beta * (full + sub * rho_sq))
}

/// Bias, variance and their sum, the expected normalized squared error.
pub fn error_objective(alpha: f64, beta: f64, k: usize, n: usize, rho_sq: f64) -> Result<ErrorProfile, AnalysisError> {
    Ok(ErrorProfile::new(
        normalized_bias(alpha, beta, k, n, rho_sq)?,
        normalized_variance(alpha, beta, k, n, rho_sq)?,
        rho_sq,
    ))
}

/// `θ = (αβ, (1−α)β)`
pub fn to_theta(alpha: f64, beta: f64) -> Vector2<f64> {
    Vector2::new(alpha * beta, (1.0 - alpha) * beta)
}

/// Inverse of [`to_theta`] on the nonnegative orthant. `θ = 0` maps to `(1, 0)`.
pub fn from_theta(theta: Vector2<f64>) -> (f64, f64) {
    let beta = theta[0] + theta[1];
    if beta <= 0.0 {
        (1.0, 0.0)
    } else {
        ((theta[0] / beta).clamp(0.0, 1.0), beta)
    }
}

/// The symmetric matrix `A` and vector `b` with
/// `b̃ + ṽ = θᵀAθ − 2bᵀθ + 1`.
///
/// `A` is indefinite for small `‖ρ‖` (its determinant is negative near
/// `ρ = 0`), so the objective is not convex on all of `ℝ²`; it is, however,
/// bounded below by zero on `θ ⪰ 0`.
pub fn reparameterized_system(k: usize, n: usize, rho: f64) -> Result<(Matrix2<f64>, Vector2<f64>), AnalysisError> {
    check_dims(k, n)?;
    check_unit("rho", rho)?;
    let (k, n) = (k as f64, n as f64);
    let r2 = rho * rho;
    let a11 = 2.0 / (n * n) + 1.0 / n;
    let a12 = 0.5 * (4.0 * r2 / (k * n) + r2 / k + 1.0 / n);
    let a22 = (2.0 / (k * k) + 1.0 / k) * r2;
    Ok((Matrix2::new(a11, a12, a12, a22), Vector2::new(1.0 / n, r2 / k)))
}

fn quadratic_value(a: &Matrix2<f64>, b: &Vector2<f64>, theta: &Vector2<f64>) -> f64 {
    theta.dot(&(a * theta)) - 2.0 * b.dot(theta) + 1.0
}

/// Minimizer of the expected normalized squared error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimalHyperparameters {
    pub alpha: f64,
    pub beta: f64,
    pub theta: Vector2<f64>,
    /// `b̃ + ṽ` at the optimum.
    pub objective: f64,
}

/// Solves `min θᵀAθ − 2bᵀθ` over `θ ⪰ 0` by enumerating active sets.
///
/// Candidates are the stationary point of every face on which the restricted
/// quadratic is strictly convex (interior, `θ₁ = 0`, `θ₂ = 0`) plus the
/// origin. Because the objective is bounded below on the orthant, the global
/// minimum is one of them even where `A` is indefinite.
pub fn optimal_hyperparameters(k: usize, n: usize, rho: f64) -> Result<OptimalHyperparameters, AnalysisError> {
    let (a, b) = reparameterized_system(k, n, rho)?;
    let mut candidates = vec![Vector2::zeros()];
    let det = a.determinant();
    if a[(0, 0)] > 0.0 && det > 0.0 {
        let theta = Vector2::new(
            (a[(1, 1)] * b[0] - a[(0, 1)] * b[1]) / det,
            (a[(0, 0)] * b[1] - a[(1, 0)] * b[0]) / det,
        );
        if theta[0] >= 0.0 && theta[1] >= 0.0 {
            candidates.push(theta);
        }
    }
    if a[(1, 1)] > 0.0 {
        candidates.push(Vector2::new(0.0, b[1] / a[(1, 1)]));
    }
    if a[(0, 0)] > 0.0 {
        candidates.push(Vector2::new(b[0] / a[(0, 0)], 0.0));
    }
    let (theta, objective) = candidates.into_iter().map(|t| (t, quadratic_value(&a, &b, &t))).fold(
        (Vector2::zeros(), f64::INFINITY),
        |best, c| if c.1 < best.1 { c } else { best },
    );
    let (alpha, beta) = from_theta(theta);
    Ok(OptimalHyperparameters {
        alpha,
        beta,
        theta,
        objective,
    })
}

/// `(√(k/n), √((k+4)/(n+4)))`: below the first value pure full-space search
/// is optimal, above the second pure subspace search is.
pub fn regime_boundaries(k: usize, n: usize) -> Result<(f64, f64), AnalysisError> {
    check_dims(k, n)?;
    let (k, n) = (k as f64, n as f64);
    Ok(((k / n).sqrt(), ((k + 4.0) / (n + 4.0)).sqrt()))
}

/// One point of the `(α, β)` error surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint {
    pub alpha: f64,
    pub beta: f64,
    pub bias: f64,
    pub variance: f64,
    pub total: f64,
}

/// `grid` evenly spaced values covering `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, grid: usize) -> impl Iterator<Item = f64> + Clone {
    let step = if grid > 1 { (hi - lo) / (grid - 1) as f64 } else { 0.0 };
    (0..grid).map(move |i| {
        if i + 1 == grid && grid > 1 {
            hi
        } else {
            lo + step * i as f64
        }
    })
}

pub const SURFACE_BETA_MAX: f64 = 4.0;

/// Bias, variance and total on a `grid × grid` lattice over
/// `α ∈ [0, 1]`, `β ∈ [0, 4]`, α-major.
pub fn error_surface(k: usize, n: usize, rho: f64, grid: usize) -> Result<Vec<SurfacePoint>, AnalysisError> {
    check_dims(k, n)?;
    check_unit("rho", rho)?;
    let rho_sq = rho * rho;
    let mut out = Vec::with_capacity(grid * grid);
    for alpha in linspace(0.0, 1.0, grid) {
        for beta in linspace(0.0, SURFACE_BETA_MAX, grid) {
            let p = error_objective(alpha, beta, k, n, rho_sq)?;
            out.push(SurfacePoint {
                alpha,
                beta,
                bias: p.bias,
                variance: p.variance,
                total: p.total,
            });
        }
    }
    Ok(out)
}

/// One point of the optimal-hyperparameter map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegimePoint {
    pub k: usize,
    pub k_over_n: f64,
    pub rho: f64,
    pub alpha_star: f64,
    pub beta_star: f64,
}

/// Optimal hyperparameters for every `k ∈ 1..=n` and `grid` values of
/// `‖ρ‖ ∈ [0, 1]`.
pub fn regime_map(n: usize, grid: usize) -> Result<Vec<RegimePoint>, AnalysisError> {
    let mut out = Vec::with_capacity(n * grid);
    for k in 1..=n {
        for rho in linspace(0.0, 1.0, grid) {
            let opt = optimal_hyperparameters(k, n, rho)?;
            out.push(RegimePoint {
                k,
                k_over_n: k as f64 / n as f64,
                rho,
                alpha_star: opt.alpha,
                beta_star: opt.beta,
            });
        }
    }
    Ok(out)
}

/// Empirical bias and total variance of the estimator at `x`.
///
/// Sample `i` uses the perturbation stream `(seed, iteration = i)`. Samples are
/// summed in fixed-size chunks that are combined in order, so the result does
/// not depend on the number of worker threads. Meant for objectives that are
/// quadratic, where the formulas above are exact.
pub fn monte_carlo_error_profile<F: Objective + ?Sized>(
    f: &F,
    x: &Vector,
    true_grad: &Vector,
    cfg: &SearchConfig,
    basis: &SubspaceBasis,
    samples: usize,
    seed: u64,
) -> Result<ErrorProfile, AnalysisError> {
    if samples < MIN_MONTE_CARLO_SAMPLES {
        return Err(AnalysisError::TooFewSamples(samples));
    }
    let grad_sq = true_grad.norm_squared();
    if grad_sq == 0.0 {
        return Err(AnalysisError::ZeroGradient);
    }
    let key = StreamKey::new(seed, Purpose::MonteCarlo);
    let chunks: Vec<(Vector, f64)> = (0..samples.div_ceil(MC_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut sum = Vector::zeros(x.len());
            let mut sum_sq = 0.0;
            for i in c * MC_CHUNK..((c + 1) * MC_CHUNK).min(samples) {
                let g = estimate_gradient(f, x, cfg, basis, key.at(i as u64))?.direction;
                sum_sq += g.norm_squared();
                sum += g;
            }
            Ok((sum, sum_sq))
        })
        .collect::<Result<_, EstimateError>>()?;
    let mut sum = Vector::zeros(x.len());
    let mut sum_sq = 0.0;
    for (s, q) in chunks {
        sum += s;
        sum_sq += q;
    }
    let count = samples as f64;
    let mean = sum / count;
    let bias = (&mean - true_grad).norm_squared() / grad_sq;
    let variance = (sum_sq - count * mean.norm_squared()) / (count - 1.0) / grad_sq;
    let rho_sq = if basis.effective_rank() == 0 {
        0.0
    } else {
        correlation(basis, true_grad)?.norm.powi(2)
    };
    Ok(ErrorProfile::new(bias, variance.max(0.0), rho_sq))
}

/// `f(x) = ½‖x‖²`
pub struct HalfSquaredNorm {
    pub dim: usize,
}

impl Objective for HalfSquaredNorm {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &Vector) -> f64 {
        0.5 * x.norm_squared()
    }
}

impl HalfSquaredNorm {
    pub fn gradient(&self, x: &Vector) -> Vector {
        x.clone()
    }
}

/// Both sides of `E[f(x − g)] = ½·E[‖∇f(x) − g‖²]` for `f = ½‖x‖²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SgdEquivalence {
    /// Mean loss after one unit-rate step.
    pub lhs: f64,
    /// Mean half squared estimation error.
    pub rhs: f64,
    /// Largest per-sample `|lhs − rhs|`.
    pub max_abs_diff: f64,
}

/// Evaluates both sides on the same estimates; sample `i` uses perturbation
/// stream `(seed, iteration = i)`.
pub fn sgd_equivalence_check(
    cfg: &SearchConfig,
    basis: &SubspaceBasis,
    x: &Vector,
    samples: usize,
    seed: u64,
) -> Result<SgdEquivalence, AnalysisError> {
    let f = HalfSquaredNorm { dim: x.len() };
    let grad = f.gradient(x);
    let key = StreamKey::new(seed, Purpose::MonteCarlo);
    let (mut lhs, mut rhs, mut diff) = (0.0, 0.0, 0.0f64);
    for i in 0..samples {
        let g = estimate_gradient(&f, x, cfg, basis, key.at(i as u64))?.direction;
        let after = f.eval(&(x - &g));
        let err = 0.5 * (&grad - &g).norm_squared();
        lhs += after;
        rhs += err;
        diff = diff.max((after - err).abs());
    }
    let count = samples.max(1) as f64;
    Ok(SgdEquivalence {
        lhs: lhs / count,
        rhs: rhs / count,
        max_abs_diff: diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const K: usize = 3;
    const N: usize = 100;

    #[test]
    fn bias_anchor_points() {
        for rho_sq in [0.0, 0.3, 1.0] {
            assert_eq!(normalized_bias(1.0, N as f64, K, N, rho_sq).unwrap(), 0.0);
        }
        assert_eq!(normalized_bias(0.0, K as f64, K, N, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn variance_anchor_points() {
        assert!((normalized_variance(1.0, N as f64, K, N, 0.4).unwrap() - 101.0).abs() < 1e-12);
        assert!((normalized_variance(0.0, K as f64, K, N, 1.0).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn range_checks() {
        assert!(normalized_bias(1.5, 1.0, K, N, 0.1).is_err());
        assert!(normalized_variance(0.5, -1.0, K, N, 0.1).is_err());
        assert!(normalized_bias(0.5, 1.0, K, N, 1.1).is_err());
        assert_eq!(
            error_objective(0.5, 1.0, 101, 100, 0.1).unwrap_err(),
            AnalysisError::SubspaceExceedsDim { k: 101, n: 100 }
        );
    }

    #[test]
    fn total_is_sum() {
        let p = error_objective(0.3, 1.7, K, N, 0.0529).unwrap();
        let b = normalized_bias(0.3, 1.7, K, N, 0.0529).unwrap();
        let v = normalized_variance(0.3, 1.7, K, N, 0.0529).unwrap();
        assert!((p.total - b - v).abs() <= 1e-14);
    }

    /// Expanded error objective written out term by term in `(α, β)`.
    fn expanded(alpha: f64, beta: f64, k: f64, n: f64, rho_sq: f64) -> f64 {
        let a = 1.0 - alpha;
        2.0 * beta * beta * alpha * alpha / (n * n)
            + (beta * beta - 2.0 * beta) * alpha / n
            + 1.0
            + (2.0 * beta * beta * a * a / (k * k)
                + 4.0 * beta * beta * alpha * a / (k * n)
                + (beta * beta - 2.0 * beta) * a / k)
                * rho_sq
    }

    fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let a = hi - r * (hi - lo);
            let b = lo + r * (hi - lo);
            if f(a) < f(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn isotropic_optimum_beta_by_line_search() {
        let beta = golden_section(|b| error_objective(1.0, b, K, N, 0.3).unwrap().total, 0.0, 10.0);
        // flat minimum: the line search resolves β to about √(ε/curvature)
        assert!((beta - N as f64 / (N as f64 + 2.0)).abs() < 1e-6);
    }

    #[test]
    fn edge_regimes_match_closed_form() {
        let low = optimal_hyperparameters(K, N, 0.05).unwrap();
        assert_eq!(low.alpha, 1.0);
        assert!((low.beta - 100.0 / 102.0).abs() < 1e-12);

        let high = optimal_hyperparameters(K, N, 0.9).unwrap();
        assert_eq!(high.alpha, 0.0);
        assert!((high.beta - 0.6).abs() < 1e-12);

        let zero = optimal_hyperparameters(K, N, 0.0).unwrap();
        assert_eq!(zero.alpha, 1.0);
        assert!((zero.beta - 100.0 / 102.0).abs() < 1e-12);
    }

    fn grid_minimum(k: usize, n: usize, rho: f64, grid: usize) -> (f64, f64, f64) {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for alpha in linspace(0.0, 1.0, grid) {
            for beta in linspace(0.0, 4.0, grid) {
                let t = error_objective(alpha, beta, k, n, rho * rho).unwrap().total;
                if t < best.0 {
                    best = (t, alpha, beta);
                }
            }
        }
        best
    }

    #[test]
    fn intermediate_regime_matches_grid() {
        let opt = optimal_hyperparameters(K, N, 0.23).unwrap();
        assert!(opt.alpha > 0.0 && opt.alpha < 1.0);
        let (grid, _, _) = grid_minimum(K, N, 0.23, 400);
        let at_opt = error_objective(opt.alpha, opt.beta, K, N, 0.0529).unwrap().total;
        assert!((at_opt - opt.objective).abs() < 1e-12);
        assert!(at_opt <= grid + 1e-12);
        assert!(grid - at_opt <= 1e-4);
    }

    #[test]
    fn surface_minimum_coincides_with_solver() {
        let grid = 400;
        let surface = error_surface(K, N, 0.23, grid).unwrap();
        assert_eq!(surface.len(), grid * grid);
        let best = surface.iter().min_by(|a, b| a.total.total_cmp(&b.total)).unwrap();
        let opt = optimal_hyperparameters(K, N, 0.23).unwrap();
        assert!((best.alpha - opt.alpha).abs() <= 1.0 / (grid - 1) as f64);
        assert!((best.beta - opt.beta).abs() <= 4.0 / (grid - 1) as f64);
    }

    #[test]
    fn boundaries_for_figure_instance() {
        let (lo, hi) = regime_boundaries(3, 100).unwrap();
        assert!((lo - 0.173_205_080_756_887_7).abs() < 1e-15);
        assert!((hi - (7f64 / 104.0).sqrt()).abs() < 1e-15);
        assert!((hi - 0.259_437).abs() < 1e-6);
        assert_eq!(regime_boundaries(50, 50).unwrap(), (1.0, 1.0));
        assert!(regime_boundaries(5, 4).is_err());
    }

    #[test]
    fn solver_sweep_reproduces_boundaries() {
        let (lo, hi) = regime_boundaries(K, N).unwrap();
        let rhos: Vec<f64> = (0..=1000).map(|i| i as f64 * 1e-3).collect();
        let alphas: Vec<f64> = rhos
            .iter()
            .map(|&r| optimal_hyperparameters(K, N, r).unwrap().alpha)
            .collect();
        let first_mixed = rhos.iter().zip(&alphas).find(|(_, &a)| a < 1.0 - 1e-6).unwrap().0;
        let last_mixed = rhos.iter().zip(&alphas).rev().find(|(_, &a)| a > 1e-6).unwrap().0;
        assert!((first_mixed - lo).abs() <= 2e-3);
        assert!((last_mixed - hi).abs() <= 2e-3);
    }

    #[test]
    fn reparameterized_matrix_is_indefinite_for_weak_correlation() {
        let (a, _) = reparameterized_system(K, N, 0.05).unwrap();
        assert!(a.determinant() < 0.0);
        let (a, _) = reparameterized_system(K, N, 0.23).unwrap();
        assert!(a.determinant() > 0.0);
    }

    #[test]
    fn regime_map_shape() {
        let map = regime_map(10, 11).unwrap();
        assert_eq!(map.len(), 110);
        assert!(map
            .iter()
            .all(|p| (0.0..=1.0).contains(&p.alpha_star) && p.beta_star >= 0.0));
        assert_eq!(map[0].rho, 0.0);
        assert_eq!(map[10].rho, 1.0);
    }

    #[test]
    fn monte_carlo_rejects_small_sample_counts() {
        let f = HalfSquaredNorm { dim: 3 };
        let x = Vector::from_element(3, 1.0);
        let cfg = SearchConfig::vanilla(3, 1.0, 0.1, 1);
        let err = monte_carlo_error_profile(&f, &x, &x, &cfg, &SubspaceBasis::empty(3, 1), 999, 0);
        assert_eq!(err.unwrap_err(), AnalysisError::TooFewSamples(999));
    }

    #[test]
    fn sgd_identity_holds_per_sample_at_unit_vector() {
        let mut x = Vector::zeros(5);
        x[0] = 1.0;
        let basis = SubspaceBasis::from_columns(&crate::Matrix::identity(5, 2));
        let cfg = SearchConfig::new(5, 2);
        let check = sgd_equivalence_check(&cfg, &basis, &x, 100, 3).unwrap();
        assert_eq!(check.max_abs_diff, 0.0);
        assert_eq!(check.lhs, check.rhs);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn bias_and_variance_are_nonnegative(
            alpha in 0.0f64..=1.0,
            beta in 0.0f64..20.0,
            n in 1usize..2000,
            k in 1usize..2000,
            rho_sq in 0.0f64..=1.0,
        ) {
            let k = k.min(n);
            prop_assert!(normalized_bias(alpha, beta, k, n, rho_sq).unwrap() >= 0.0);
            prop_assert!(normalized_variance(alpha, beta, k, n, rho_sq).unwrap() >= 0.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn reparameterization_round_trip(
            alpha in 0.0f64..=1.0,
            beta in 1e-3f64..10.0,
            n in 1usize..500,
            k in 1usize..500,
            rho in 0.0f64..=1.0,
        ) {
            let k = k.min(n);
            let direct = error_objective(alpha, beta, k, n, rho * rho).unwrap().total;
            let (a, b) = reparameterized_system(k, n, rho).unwrap();
            let theta = to_theta(alpha, beta);
            let via_theta = quadratic_value(&a, &b, &theta);
            let tol = 1e-12 * (1.0 + direct.abs() + beta * beta);
            prop_assert!((direct - via_theta).abs() <= tol);
            prop_assert!((direct - expanded(alpha, beta, k as f64, n as f64, rho * rho)).abs() <= tol);
            let (a2, b2) = from_theta(theta);
            prop_assert!((a2 - alpha).abs() <= 1e-12 && (b2 - beta).abs() <= 1e-12 * beta);
        }

        #[test]
        fn solver_output_is_feasible_and_no_worse_than_candidates(
            n in 1usize..1000,
            k in 1usize..1000,
            rho in 0.0f64..=1.0,
        ) {
            let k = k.min(n);
            let opt = optimal_hyperparameters(k, n, rho).unwrap();
            prop_assert!((0.0..=1.0).contains(&opt.alpha));
            prop_assert!(opt.beta >= 0.0);
            let at = error_objective(opt.alpha, opt.beta, k, n, rho * rho).unwrap().total;
            prop_assert!((at - opt.objective).abs() <= 1e-10);
            for (alpha, beta) in [(1.0, 0.0), (0.0, 1.0), (1.0, n as f64 / (n as f64 + 2.0)), (0.5, 2.0)] {
                prop_assert!(opt.objective <= error_objective(alpha, beta, k, n, rho * rho).unwrap().total + 1e-12);
            }
        }
    }
}
