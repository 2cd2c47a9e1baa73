//! Seeded, splittable randomness.
//!
//! Every draw sequence is identified by a `(seed, stream_id)` pair. The
//! generator is ChaCha8, which is counter based: the seed fixes the key and
//! the stream id selects an independent 2^64-block keystream, so replicate
//! `r` of an experiment reproduces bit-for-bit no matter which worker runs it.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a, used to turn experiment names into stream prefixes.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Stream id of replicate `replicate` of the experiment named `experiment`.
pub fn stream_for(experiment: &str, replicate: u64) -> u64 {
    mix64(fnv1a(experiment.as_bytes()) ^ mix64(replicate.wrapping_add(GOLDEN)))
}

#[derive(Clone, Debug)]
pub struct RandomSource {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    /// Source for replicate `replicate` of a named experiment.
    pub fn for_replicate(seed: u64, experiment: &str, replicate: u64) -> Self {
        Self::new(seed, stream_for(experiment, replicate))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A child stream keyed by `label`. Independent of how much of `self`
    /// has been consumed.
    pub fn derive(&self, label: u64) -> Self {
        let child = mix64(self.stream_id ^ mix64(label ^ GOLDEN).rotate_left(17));
        Self::new(self.seed, child)
    }

    /// Uniform in [0, 1) that depends only on `(seed, stream_id, key)`.
    /// Does not advance the stream, so two code paths asking for the same
    /// key see the same number.
    pub fn keyed_uniform(&self, key: u64) -> f64 {
        let h = mix64(
            self.seed ^ mix64(self.stream_id.wrapping_add(GOLDEN)) ^ mix64(key.wrapping_mul(GOLDEN)),
        );
        (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform in [0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform in (0, 1].
    #[inline]
    pub fn uniform_pos(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Exponential waiting time with the given rate.
    #[inline]
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -self.uniform_pos().ln() / rate
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn poisson(&mut self, mean: f64) -> u64 {
        if mean <= 0.0 {
            return 0;
        }
        match Poisson::new(mean) {
            Ok(dist) => {
                let x: f64 = dist.sample(&mut self.rng);
                x as u64
            }
            // Means beyond the sampler's range: normal approximation.
            Err(_) => (mean + mean.sqrt() * self.normal()).round().max(0.0) as u64,
        }
    }

    /// Number of trials up to and including the first success, support {1, 2, ...}.
    pub fn geometric(&mut self, success: f64) -> u64 {
        if success >= 1.0 {
            return 1;
        }
        let u = self.uniform_pos();
        let k = (u.ln() / (1.0 - success).ln()).floor();
        if k.is_finite() && k < 9.0e18 {
            k as u64 + 1
        } else {
            u64::MAX
        }
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Runs `f` on replicates `0..n`, each with its own stream derived from
/// `base`, across the rayon pool. Results come back in replicate order.
pub fn par_replicates<T, F>(base: &RandomSource, n: usize, f: F) -> crate::Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, RandomSource) -> crate::Result<T> + Sync,
{
    use rayon::prelude::*;
    (0..n)
        .into_par_iter()
        .map(|r| f(r, base.derive(r as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_pair_same_sequence() {
        let mut a = RandomSource::new(7, 3);
        let mut b = RandomSource::new(7, 3);
        for _ in 0..100 {
            assert_eq!(a.normal().to_bits(), b.normal().to_bits());
        }
    }

    #[test]
    fn streams_differ() {
        let mut a = RandomSource::new(7, 3);
        let mut b = RandomSource::new(7, 4);
        let xa: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(xa, xb);
    }

    #[test]
    fn derive_ignores_consumption() {
        let a = RandomSource::new(1, 2);
        let mut b = a.clone();
        b.normal();
        assert_eq!(a.derive(9).stream_id(), b.derive(9).stream_id());
        assert_ne!(a.derive(9).stream_id(), a.derive(10).stream_id());
    }

    #[test]
    fn keyed_uniform_is_stateless() {
        let a = RandomSource::new(5, 6);
        let u = a.keyed_uniform(42);
        assert_eq!(u, a.keyed_uniform(42));
        assert!((0.0..1.0).contains(&u));
    }

    #[test]
    fn streams_are_uncorrelated() {
        let n = 20_000;
        let mut a = RandomSource::new(11, stream_for("x", 0));
        let mut b = RandomSource::new(11, stream_for("x", 1));
        let mut s = 0.0;
        for _ in 0..n {
            s += a.normal() * b.normal();
        }
        // sample correlation ~ N(0, 1/n)
        assert!((s / n as f64).abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn geometric_mean() {
        let mut r = RandomSource::new(3, 3);
        let n = 50_000;
        let p = 0.25;
        let m: f64 = (0..n).map(|_| r.geometric(p) as f64).sum::<f64>() / n as f64;
        // mean 1/p = 4, sd sqrt(1-p)/p ~ 3.46
        assert!((m - 4.0).abs() < 4.0 * 3.47 / (n as f64).sqrt());
    }
}
