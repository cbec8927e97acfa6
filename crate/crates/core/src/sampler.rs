//! Perturbations from `N(0, σ²Σ)` through the low-rank factorization
//! `ε = σ·√(α/n)·z + σ·√((1−α)/k)·U·z'`.

use rand::Rng;
use thiserror::Error;

use crate::rng::gaussian_vector;
use crate::types::{SearchConfig, SubspaceBasis};
use crate::Vector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("basis has dimension {basis} but the configuration expects {config}")]
    DimensionMismatch { basis: usize, config: usize },
    #[error("alpha = {alpha} < 1 requires a nonempty guiding subspace")]
    DegenerateBasis { alpha: f64 },
}

/// `ε` and `−ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationPair {
    pub positive: Vector,
    pub negative: Vector,
}

/// Draws one perturbation.
///
/// The full-space draw `z` is taken before the subspace draw `z'`, and the
/// subspace term is skipped entirely when `α = 1`, so isotropic search gives
/// the same bits whether or not a basis is supplied. The subspace factor uses
/// the effective rank of the basis in place of `k`.
pub fn sample_perturbation<R: Rng + ?Sized>(
    cfg: &SearchConfig,
    basis: &SubspaceBasis,
    rng: &mut R,
) -> Result<Vector, SamplerError> {
    let n = cfg.param_dim;
    if basis.dim() != n {
        return Err(SamplerError::DimensionMismatch {
            basis: basis.dim(),
            config: n,
        });
    }
    let subspace_weight = 1.0 - cfg.alpha;
    let rank = basis.effective_rank();
    if subspace_weight > 0.0 && rank == 0 {
        return Err(SamplerError::DegenerateBasis { alpha: cfg.alpha });
    }

    let z = gaussian_vector(rng, n);
    let mut eps = z * (cfg.sigma * (cfg.alpha / n as f64).sqrt());
    if subspace_weight > 0.0 {
        let z_sub = gaussian_vector(rng, rank);
        let scale = cfg.sigma * (subspace_weight / rank as f64).sqrt();
        eps.gemv(scale, basis.columns(), &z_sub, 1.0);
    }
    Ok(eps)
}

pub fn antithetic_pair<R: Rng + ?Sized>(
    cfg: &SearchConfig,
    basis: &SubspaceBasis,
    rng: &mut R,
) -> Result<PerturbationPair, SamplerError> {
    let positive = sample_perturbation(cfg, basis, rng)?;
    let negative = -&positive;
    Ok(PerturbationPair { positive, negative })
}
