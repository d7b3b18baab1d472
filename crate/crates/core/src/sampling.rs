//! Seeded samplers shared by the sampling-based checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

pub type CheckRng = ChaCha8Rng;

pub fn rng(seed: u64) -> CheckRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform point on the simplex (symmetric Dirichlet with unit concentration).
pub fn uniform_simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|e| *e /= s);
    v
}

/// Uniform vector in `[lo, hi]^n`.
pub fn uniform_box<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..=hi)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_samples_are_valid_and_seeded() {
        let mut a = rng(7);
        let mut b = rng(7);
        for _ in 0..100 {
            let x = uniform_simplex(&mut a, 4);
            assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(x.iter().all(|&e| e >= 0.0));
            assert_eq!(x, uniform_simplex(&mut b, 4));
        }
    }
}
