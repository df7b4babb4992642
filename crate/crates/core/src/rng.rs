//! Per-trajectory random stream.
//!
//! Each trajectory owns one ChaCha8 stream seeded from
//! [`trajectory_seed`](crate::trajectory::trajectory_seed). Gaussian variates
//! use the Box-Muller transform so that the sequence of uniforms consumed per
//! draw is fixed and trajectories are bit-reproducible.

use core::f64::consts::TAU;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const TWO_POW_53_INV: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Debug, Clone)]
pub struct TrajectoryRng {
    inner: ChaCha8Rng,
}

impl TrajectoryRng {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform in [0, 1), 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * TWO_POW_53_INV
    }

    /// Uniform in (0, 1].
    #[inline]
    fn uniform_open_low(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) + 1) as f64 * TWO_POW_53_INV
    }

    /// Two independent standard normal variates (one Box-Muller pair).
    #[inline]
    pub fn standard_normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.uniform_open_low();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        (r * c, r * s)
    }

    /// One standard normal variate; consumes a full Box-Muller pair of
    /// uniforms and discards the second normal.
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.standard_normal_pair().0
    }

    /// Bernoulli trial with success probability `p`. Always consumes exactly
    /// one uniform, whatever `p` is.
    #[inline]
    pub fn coin(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = TrajectoryRng::from_seed(42);
        let mut b = TrajectoryRng::from_seed(42);
        for _ in 0..100 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn uniform_range() {
        let mut r = TrajectoryRng::from_seed(1);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
            let v = r.uniform_open_low();
            assert!(v > 0.0 && v <= 1.0);
        }
    }

    #[test]
    fn normal_moments() {
        let mut r = TrajectoryRng::from_seed(7);
        let n = 200_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n / 2 {
            let (a, b) = r.standard_normal_pair();
            s1 += a + b;
            s2 += a * a + b * b;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 3.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn zero_probability_coin_never_lands_heads() {
        let mut r = TrajectoryRng::from_seed(3);
        assert!((0..10_000).all(|_| !r.coin(0.0)));
        assert!((0..10_000).all(|_| r.coin(1.0)));
    }
}
