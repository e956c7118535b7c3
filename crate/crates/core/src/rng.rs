//! Seeded sampling helpers.
//!
//! All stochastic output in the crate flows through a ChaCha stream cipher
//! RNG and the two samplers below, so a fixed seed reproduces results
//! bit-for-bit on any platform.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Poisson sample via Knuth's product method; switches to a clamped normal
/// approximation for large means where the product would underflow.
pub fn poisson(rng: &mut SeededRng, mean: f64) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    if mean < 30.0 {
        let limit = (-mean).exp();
        let mut product = rng.gen::<f64>();
        let mut count = 0u32;
        while product > limit {
            product *= rng.gen::<f64>();
            count += 1;
        }
        count
    } else {
        let sample = mean + mean.sqrt() * standard_normal(rng);
        sample.round().max(0.0) as u32
    }
}

/// Standard normal via Box-Muller on the ChaCha stream.
pub fn standard_normal(rng: &mut SeededRng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_mean_and_determinism() {
        let mut rng = seeded(42);
        let n = 200_000;
        let mean = 0.8;
        let total: u64 = (0..n).map(|_| poisson(&mut rng, mean) as u64).sum();
        let observed = total as f64 / n as f64;
        assert!((observed - mean).abs() < 0.01, "observed {observed}");

        let a: Vec<u32> = {
            let mut r = seeded(7);
            (0..100).map(|_| poisson(&mut r, 2.5)).collect()
        };
        let b: Vec<u32> = {
            let mut r = seeded(7);
            (0..100).map(|_| poisson(&mut r, 2.5)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn normal_moments() {
        let mut rng = seeded(3);
        let n = 200_000;
        let samples: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.02);
    }
}
