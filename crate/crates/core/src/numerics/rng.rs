use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

/// Seeded pseudo-random stream.
///
/// The generator is ChaCha with 8 rounds (`rand_chacha::ChaCha8Rng`), keyed
/// by `SeedableRng::seed_from_u64(seed)`. Stream number 0 is the main stream;
/// [`Rng::substream`] selects ChaCha stream `id + 1` under the same key, so
/// substreams never overlap each other or the main stream.
///
/// * uniforms in `[0, 1)` take the top 53 bits of `next_u64`;
/// * normals use the Box–Muller transform, caching the second variate.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Independent stream `id` derived from `seed`. Does not depend on any
    /// generator state, only on `(seed, id)`.
    pub fn substream(seed: u64, id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(id.wrapping_add(1));
        Self {
            seed,
            inner,
            spare_normal: None,
        }
    }

    /// Substream `id` of this generator's seed.
    pub fn split(&self, id: u64) -> Self {
        Self::substream(self.seed, id)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n` (rejection sampling, unbiased). `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// Uniform integer in `lo..=hi`.
    pub fn int_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        lo + self.below(hi - lo + 1)
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Standard normal via Box–Muller.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // u1 in (0, 1] keeps ln finite
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// Normal with the given mean and std; `std == 0` returns `mean` exactly
    /// without consuming randomness.
    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        if std == 0.0 {
            return mean;
        }
        mean + std * self.standard_normal()
    }
}

/// Draws one Gaussian variate.
pub fn gaussian(rng: &mut Rng, mean: f64, std: f64) -> Result<f64> {
    if !(std >= 0.0) {
        return Err(Error::invalid(format!("negative std {std}")));
    }
    Ok(rng.normal(mean, std))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_normal_returns_mean() {
        let mut rng = Rng::new(1);
        assert_eq!(gaussian(&mut rng, 0.7, 0.0).unwrap(), 0.7);
    }

    #[test]
    fn negative_std_rejected() {
        assert!(gaussian(&mut Rng::new(1), 0.0, -1.0).is_err());
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..1000 {
            assert_eq!(
                gaussian(&mut a, 0.0, 1.0).unwrap().to_bits(),
                gaussian(&mut b, 0.0, 1.0).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn normal_moments() {
        let mut rng = Rng::new(2024);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| gaussian(&mut rng, 0.0, 1.0).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 0.02, "std {}", var.sqrt());
    }

    #[test]
    fn substreams_differ_and_are_stable() {
        let a: Vec<u64> = (0..4).map(|_| 0).scan(Rng::substream(9, 0), |r, _| Some(r.next_u64())).collect();
        let b: Vec<u64> = (0..4).map(|_| 0).scan(Rng::substream(9, 1), |r, _| Some(r.next_u64())).collect();
        let main: Vec<u64> = (0..4).map(|_| 0).scan(Rng::new(9), |r, _| Some(r.next_u64())).collect();
        assert_ne!(a, b);
        assert_ne!(a, main);
        let mut parent = Rng::new(9);
        parent.next_u64();
        assert_eq!(parent.split(0).next_u64(), a[0]);
    }

    #[test]
    fn below_stays_in_range() {
        let mut rng = Rng::new(0);
        let mut seen = [false; 7];
        for _ in 0..1000 {
            seen[rng.below(7)] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
