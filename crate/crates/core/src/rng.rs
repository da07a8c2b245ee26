//! Keyed counter-based random numbers.
//!
//! Every random draw is a pure function of a [`StreamKey`] and a 64-bit
//! counter: `bits = mix64(key ^ mix64(counter * γ))`, where `mix64` is the
//! SplitMix64 finalizer and `γ` the golden-ratio increment. Keys are split
//! from a root seed with string tags and integer indices (experiment,
//! replicate, time, ...), and counters are global edge indices, so any edge
//! of any replicate can be sampled on its own, in any order, on any thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// 2^53 as a float; uniforms carry 53 random bits.
pub const UNIT_SCALE: f64 = 9_007_199_254_740_992.0;

/// SplitMix64 output function (a bijection on u64).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        StreamKey(mix64(seed.wrapping_add(GOLDEN_GAMMA)))
    }

    /// Independent sub-stream for an integer index.
    pub fn child(self, index: u64) -> Self {
        StreamKey(mix64(
            self.0 ^ mix64(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)).rotate_left(23),
        ))
    }

    /// Independent sub-stream for a named purpose.
    pub fn tag(self, tag: &str) -> Self {
        self.child(fnv1a(tag))
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn bits(self, counter: u64) -> u64 {
        mix64(self.0 ^ mix64(counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// The 53-bit integer behind [`StreamKey::uniform`].
    #[inline]
    pub fn unit_bits(self, counter: u64) -> u64 {
        self.bits(counter) >> 11
    }

    /// Uniform draw in [0, 1).
    #[inline]
    pub fn uniform(self, counter: u64) -> f64 {
        self.unit_bits(counter) as f64 / UNIT_SCALE
    }

    /// Sequential generator for processes that consume draws one at a time.
    pub fn sequential(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// Integer threshold `τ` with `unit_bits < τ ⇔ uniform < p`.
///
/// `p·2^53` is exact in binary floating point, so the ceiling gives an exact
/// integer comparison equivalent to the float one.
#[inline]
pub fn probability_threshold(p: f64) -> u64 {
    let p = p.clamp(0.0, 1.0);
    (p * UNIT_SCALE).ceil() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_matches_float_comparison() {
        let key = StreamKey::new(7);
        for p in [0.0, 1e-9, 0.25, 0.5, 0.3333333333333333, 0.999, 1.0] {
            let tau = probability_threshold(p);
            for c in 0..2000 {
                assert_eq!(key.unit_bits(c) < tau, key.uniform(c) < p);
            }
        }
    }

    #[test]
    fn children_are_distinct() {
        let root = StreamKey::new(1);
        let mut keys: Vec<u64> = (0..1000).map(|i| root.child(i).raw()).collect();
        keys.push(root.tag("edges").raw());
        keys.sort_unstable();
        keys.dedup();
        assert_eq!(keys.len(), 1001);
    }

    #[test]
    fn uniform_mean_and_variance() {
        let key = StreamKey::new(2024).tag("check");
        let n = 200_000u64;
        let (mut s, mut s2) = (0.0, 0.0);
        for c in 0..n {
            let u = key.uniform(c);
            s += u;
            s2 += u * u;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((mean - 0.5).abs() < 4.0 * (1.0f64 / 12.0 / n as f64).sqrt());
        assert!((var - 1.0 / 12.0).abs() < 2e-3);
    }
}
