//! Exact samplers for the compound constructions behind both models.
//!
//! Each coordinate is assembled literally as the definition reads:
//! draw the latent Poisson (or zero-truncated-Poisson-minus-one) counts,
//! then add that many shifted geometric variables, sharing one common count
//! across coordinates. No inversion of the closed-form PMFs is involved.
//!
//! Determinism: the generator is ChaCha12 (`rand_chacha` 0.9) seeded with
//! `seed_from_u64`, and every variate is derived from `next_u64` alone, so a
//! given seed reproduces the identical sample stream on any platform.

use crate::distributions::{CountVector, Model, Params};
use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

/// Deterministic, seedable random generator used throughout the crate.
///
/// One instance is single-threaded state; parallel replication uses one
/// independently seeded instance per replication.
pub struct SeededRng {
    seed: u64,
    stream: ChaCha12Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            seed,
            stream: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.stream.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Shifted geometric `Ge_1(1 - rho)` on `{1, 2, ...}`:
/// `Pr(U = u) = (1 - rho) rho^{u-1}`. Sampled by inversion,
/// `u = 1 + floor(ln(1 - V) / ln(rho))`.
pub fn sample_shifted_geometric(rho: f64, rng: &mut SeededRng) -> u32 {
    debug_assert!(rho > 0.0 && rho < 1.0);
    let v = rng.uniform();
    let steps = ((1.0 - v).ln() / rho.ln()).floor();
    1 + steps as u32
}

/// Poisson sampler by inversion (sequential search). Rates above 25 are
/// split into independent halves, keeping the search short while staying
/// exact in distribution.
pub(crate) fn sample_poisson(lambda: f64, rng: &mut SeededRng) -> u32 {
    debug_assert!(lambda > 0.0);
    if lambda > 25.0 {
        let half = lambda / 2.0;
        return sample_poisson(half, rng) + sample_poisson(lambda - half, rng);
    }
    let v = rng.uniform();
    let mut pmf = (-lambda).exp();
    let mut cdf = pmf;
    let mut z = 0u32;
    while v > cdf && z < 10_000 {
        z += 1;
        pmf *= lambda / f64::from(z);
        cdf += pmf;
    }
    z
}

/// Zero-truncated Poisson on `{1, 2, ...}`. Inversion on the truncated CDF
/// for rates below 30; plain rejection from Poisson above (where the reject
/// probability `e^{-lambda}` is negligible).
fn sample_zero_truncated_poisson(lambda: f64, rng: &mut SeededRng) -> u32 {
    debug_assert!(lambda > 0.0);
    if lambda >= 30.0 {
        loop {
            let z = sample_poisson(lambda, rng);
            if z > 0 {
                return z;
            }
        }
    }
    let floor = (-lambda).exp();
    let v = floor + rng.uniform() * (1.0 - floor);
    let mut pmf = floor;
    let mut cdf = floor;
    let mut z = 0u32;
    loop {
        z += 1;
        pmf *= lambda / f64::from(z);
        cdf += pmf;
        if cdf >= v || z >= 10_000 {
            return z;
        }
    }
}

/// Weighted Poisson count with weight `w(z) = 1/(z+1)`:
/// `Pr(Z^w = z)` proportional to `e^{-lambda} lambda^z / ((z+1) z!)`,
/// equivalently a zero-truncated Poisson draw minus one.
pub fn sample_weighted_poisson(lambda: f64, rng: &mut SeededRng) -> u32 {
    sample_zero_truncated_poisson(lambda, rng) - 1
}

fn sample_compound(params: &Params, weighted: bool, rng: &mut SeededRng) -> CountVector {
    let k = params.k();
    let draw_count = |lambda: f64, rng: &mut SeededRng| {
        if weighted {
            sample_weighted_poisson(lambda, rng)
        } else {
            sample_poisson(lambda, rng)
        }
    };
    let rho = params.rho();
    let mut counts = vec![0u32; k];
    for (i, slot) in counts.iter_mut().enumerate() {
        let z = draw_count(params.lambda(i), rng);
        for _ in 0..z {
            *slot += sample_shifted_geometric(rho, rng);
        }
    }
    // One shared latent count, independent geometric summands per coordinate.
    let z_common = draw_count(params.lambda_common(), rng);
    for slot in counts.iter_mut() {
        for _ in 0..z_common {
            *slot += sample_shifted_geometric(rho, rng);
        }
    }
    CountVector::new(counts)
}

/// Draws one observation of `(N_1, ..., N_k) ~ MPA(params)`:
/// `N_i = U_i + W_i` with `U_i` compounding `Poi(lambda_i)` and `W_i`
/// compounding the shared `Poi(lambda_{k+1})` count.
pub fn sample_mpa(params: &Params, rng: &mut SeededRng) -> CountVector {
    sample_compound(params, false, rng)
}

/// Draws one observation of `(N_1^w, ..., N_k^w) ~ WMPA(params)`; identical
/// construction with weighted Poisson latent counts.
pub fn sample_wmpa(params: &Params, rng: &mut SeededRng) -> CountVector {
    sample_compound(params, true, rng)
}

/// Dispatches on the model.
pub fn sample(model: Model, params: &Params, rng: &mut SeededRng) -> CountVector {
    match model {
        Model::Mpa => sample_mpa(params, rng),
        Model::Wmpa => sample_wmpa(params, rng),
    }
}

/// Draws `n` observations into a vector.
pub fn sample_many(
    model: Model,
    params: &Params,
    n: usize,
    rng: &mut SeededRng,
) -> Vec<CountVector> {
    (0..n).map(|_| sample(model, params, rng)).collect()
}
