//! Piecewise-constant test signal with seeded Gaussian corruption.
//!
//! The clean signal is a fixed sum of step functions on an equispaced
//! grid over [0, 1]; the observed signal adds `noise_sigma` times
//! standard-normal draws from a counter-based generator, so a `(n, seed,
//! noise_sigma)` triple always produces the same pair of vectors.

use opsplit::{Error, Result, Vector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Grid positions at which the clean signal jumps.
pub const BASE_POSITIONS: [f64; 10] =
    [0.1, 0.13, 0.15, 0.23, 0.25, 0.4, 0.44, 0.65, 0.76, 0.78];

/// Jump heights, pairing with [`BASE_POSITIONS`].
pub const STEP_HEIGHTS: [f64; 10] = [4.0, -5.0, 3.0, -4.0, 5.0, -4.0, 4.0, -2.0, 4.0, -5.0];

/// Identifier of the noise construction, recorded in CSV headers so runs
/// can be checked against other implementations of the same experiment.
pub const NOISE_SAMPLER: &str = "chacha8/standard-normal";

/// Returns `(clean, noisy)` signals of length `n`.
pub fn gen_signal(n: usize, seed: u64, noise_sigma: f64) -> Result<(Vector, Vector)> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("signal length must be at least 2, got {n}")));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise level must be nonnegative, got {noise_sigma}"
        )));
    }
    let h = (n - 1) as f64;
    let mut clean = Vector::zeros(n);
    for i in 0..n {
        let x = i as f64 / h;
        clean[i] = BASE_POSITIONS
            .iter()
            .zip(STEP_HEIGHTS.iter())
            .filter(|(&pos, _)| x >= pos)
            .map(|(_, &height)| height)
            .sum();
    }
    if noise_sigma == 0.0 {
        let noisy = clean.clone();
        return Ok((clean, noisy));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noisy = clean.clone();
    for v in noisy.iter_mut() {
        let xi: f64 = StandardNormal.sample(&mut rng);
        *v += noise_sigma * xi;
    }
    Ok((clean, noisy))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_signal_values() {
        let (clean, _) = gen_signal(101, 0, 0.0).unwrap();
        // Grid point 0.5: the first seven jumps have fired.
        assert_eq!(clean[50], 3.0);
        // No jump position at or below zero.
        assert_eq!(clean[0], 0.0);
        // All ten heights sum to zero.
        assert_eq!(clean[100], 0.0);
    }

    #[test]
    fn zero_noise_returns_the_clean_signal() {
        let (clean, noisy) = gen_signal(64, 9, 0.0).unwrap();
        assert_eq!(clean, noisy);
    }

    #[test]
    fn seeded_noise_is_deterministic_and_seed_dependent() {
        let (_, a) = gen_signal(64, 3, 0.5).unwrap();
        let (_, b) = gen_signal(64, 3, 0.5).unwrap();
        let (_, c) = gen_signal(64, 4, 0.5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(gen_signal(1, 0, 0.5).is_err());
        assert!(gen_signal(10, 0, -1.0).is_err());
    }
}
