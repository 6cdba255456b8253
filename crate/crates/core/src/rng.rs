//! Deterministic random number generation.
//!
//! All stochastic behaviour in this crate (weight init, dropout, split
//! shuffles, the Gaussian test matrix of the randomized SVD, random edge/
//! feature perturbation) draws from an explicit [`RngState`]. There is no
//! global generator: a seed plus the sequence of calls fully determines every
//! draw, bit-exactly, on every platform.
//!
//! The generator is ChaCha12 (via `rand_chacha`), which has a stable,
//! portable output stream. Uniform and Gaussian doubles are derived from raw
//! 64-bit draws in-house so that the float construction is pinned here rather
//! than in a dependency.

use rand_core::{RngCore, SeedableRng};

/// Explicit, seedable PRNG state. Cheap to clone; clones evolve independently.
#[derive(Clone, Debug)]
pub struct RngState {
    seed: u64,
    rng: rand_chacha::ChaCha12Rng,
    /// Cached second output of the Box-Muller transform.
    gauss_spare: Option<f64>,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: rand_chacha::ChaCha12Rng::seed_from_u64(seed),
            gauss_spare: None,
        }
    }

    /// The seed this state was created from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent child generator for a named purpose.
    ///
    /// Children are decoupled from the parent's draw sequence, so adding or
    /// removing draws in one subsystem does not shift another's stream. The
    /// child seed is `splitmix64(seed ^ splitmix64(stream))`.
    pub fn substream(&self, stream: u64) -> RngState {
        RngState::new(splitmix64(self.seed ^ splitmix64(stream)))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal draw via the Box-Muller transform.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.gauss_spare.take() {
            return z;
        }
        // u1 in (0, 1] so the log is finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.gauss_spare = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Bernoulli draw with success probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = (self.next_u64() % (i as u64 + 1)) as usize;
            items.swap(i, j);
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = RngState::new(42);
        let mut b = RngState::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut a = RngState::new(42);
        let mut b = RngState::new(42);
        for _ in 0..100 {
            assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
        }
    }

    #[test]
    fn substreams_are_decoupled() {
        let root = RngState::new(7);
        let mut a1 = root.substream(1);
        let mut b = root.substream(2);
        let _ = b.next_u64(); // consuming one stream
        let mut a2 = root.substream(1); // ...does not shift the other
        assert_eq!(a1.next_u64(), a2.next_u64());
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut r = RngState::new(1);
        let mut sum = 0.0;
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
            sum += u;
        }
        let mean = sum / 10_000.0;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn normal_moments() {
        let mut r = RngState::new(3);
        let n = 100_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z = r.standard_normal();
            s += z;
            s2 += z * z;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut r = RngState::new(9);
        let mut v: Vec<u32> = (0..50).collect();
        r.shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
    }
}
