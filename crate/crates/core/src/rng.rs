//! Counter-based random streams.
//!
//! Every draw is addressed by `(seed, stream, index)`: the ChaCha8 key comes
//! from the seed, the nonce is the stream id and the block counter is
//! positioned at a fixed offset per sample index. Sample `i` of stream `j`
//! therefore never depends on how many other samples were drawn or by which
//! worker.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Words reserved per sample index (2^20 32-bit words).
const WORDS_PER_INDEX_SHIFT: u32 = 20;

/// FNV-1a hash used to derive stream ids from names.
pub const fn stream_id(name: &str) -> u64 {
    let bytes = name.as_bytes();
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    let mut i = 0;
    while i < bytes.len() {
        hash ^= bytes[i] as u64;
        hash = hash.wrapping_mul(0x0100_0000_01b3);
        i += 1;
    }
    hash
}

/// A named substream of a seed; hands out per-index [`RandomStream`]s.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Substream {
    pub seed: u64,
    pub id: u64,
}

impl Substream {
    pub fn named(seed: u64, name: &str) -> Self {
        Self {
            seed,
            id: stream_id(name),
        }
    }

    /// Derive a child substream, e.g. one per component.
    pub fn child(&self, label: u64) -> Self {
        let mut id = self.id ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        id ^= id >> 31;
        id = id.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        id ^= id >> 27;
        Self { seed: self.seed, id }
    }

    pub fn at(&self, index: u64) -> RandomStream {
        RandomStream::new(self.seed, self.id, index)
    }
}

/// Random numbers for one sample index of one stream.
#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng.set_word_pos(u128::from(index) << WORDS_PER_INDEX_SHIFT);
        Self { rng }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw strictly inside `(0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        ((self.next_u64() >> 11) as f64 + 0.5) * SCALE
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn draws_depend_only_on_address() {
        let s = Substream::named(7, "collect");
        let direct: Vec<f64> = (0..4).map(|_| s.at(12).uniform()).collect();
        assert!(direct.windows(2).all(|w| w[0] == w[1]));
        let mut a = s.at(12);
        let mut b = RandomStream::new(7, stream_id("collect"), 12);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn different_indices_streams_and_seeds_differ() {
        let s = Substream::named(7, "collect");
        let x = s.at(0).next_u64();
        assert_ne!(x, s.at(1).next_u64());
        assert_ne!(x, Substream::named(7, "other").at(0).next_u64());
        assert_ne!(x, Substream::named(8, "collect").at(0).next_u64());
        assert_ne!(s.child(1).id, s.child(2).id);
    }

    #[test]
    fn uniform_is_open_interval_with_right_mean() {
        let s = Substream::named(1, "u");
        let n = 200_000;
        let mut sum = 0.0;
        for i in 0..n {
            let u = s.at(i).uniform();
            assert!(u > 0.0 && u < 1.0);
            sum += u;
        }
        let mean = sum / n as f64;
        assert!((mean - 0.5).abs() < 4.0 * libm::sqrt(1.0 / 12.0 / n as f64));
    }
}
