//! Seeded random streams and the few samplers the engine needs.
//!
//! Every stochastic routine takes a `(seed, stream)` pair. Streams are ChaCha
//! stream ids, so sub-runs (Monte Carlo runs, pulse-train partitions,
//! tomography settings) are independent and can be evaluated in any order.

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

pub type SimRng = ChaCha8Rng;

/// Generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw on the open interval (0, 1).
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Number of failures before the first success of a Bernoulli(`p`) sequence.
///
/// Returns `u64::MAX` when `p` is zero.
pub fn geometric_gap<R: Rng + ?Sized>(rng: &mut R, p: f64) -> u64 {
    if p <= 0.0 {
        return u64::MAX;
    }
    if p >= 1.0 {
        return 0;
    }
    let u = open_unit(rng);
    let g = (u.ln() / (-p).ln_1p()).floor();
    if g >= u64::MAX as f64 {
        u64::MAX
    } else {
        g as u64
    }
}

/// Poisson(`mean`) count conditioned on being at least one.
pub fn truncated_poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    debug_assert!(mean > 0.0);
    if mean > 20.0 {
        let dist = Poisson::new(mean).expect("finite positive mean");
        loop {
            let k = dist.sample(rng) as u64;
            if k >= 1 {
                return k;
            }
        }
    }
    // inversion on P(k | k ≥ 1) = e^{-μ} μ^k / (k! (1 - e^{-μ}))
    let norm = -(-mean).exp_m1();
    let mut term = (-mean).exp() * mean / norm;
    let mut cumulative = term;
    let mut k = 1;
    let u: f64 = rng.random();
    while u > cumulative && k < 1000 {
        k += 1;
        term *= mean / k as f64;
        cumulative += term;
    }
    k
}

/// Poisson(`mean`) count; zero for nonpositive means.
pub fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map_or(0, |d| d.sample(rng) as u64)
}
