//! Keyed random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream whose 256-bit key
//! is `(seed, purpose, iteration, index)`. Distinct keys give independent
//! streams, so draws do not depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::Vector;

/// What a stream is used for. Part of the key, so streams for different
/// purposes never collide.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Perturbation = 1,
    SurrogateNoise = 2,
    ProblemInit = 3,
    ModelInit = 4,
    ModelBatch = 5,
    ModelData = 6,
    MonteCarlo = 7,
    Test = 8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub purpose: Purpose,
    pub iteration: u64,
    pub index: u64,
}

impl StreamKey {
    pub fn new(seed: u64, purpose: Purpose) -> Self {
        Self {
            seed,
            purpose,
            iteration: 0,
            index: 0,
        }
    }

    pub fn at(self, iteration: u64) -> Self {
        Self { iteration, ..self }
    }

    pub fn index(self, index: u64) -> Self {
        Self { index, ..self }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&(self.purpose as u64).to_le_bytes());
        key[16..24].copy_from_slice(&self.iteration.to_le_bytes());
        key[24..32].copy_from_slice(&self.index.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }
}

/// Vector of `n` standard normal draws.
pub fn gaussian_vector<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)))
}

/// Uniformly distributed unit vector.
pub fn unit_vector<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> Vector {
    loop {
        let v = gaussian_vector(rng, n);
        let norm = v.norm();
        if norm > 0.0 {
            return v / norm;
        }
    }
}
