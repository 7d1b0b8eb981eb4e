//! Splittable random streams.
//!
//! A stream is identified by `(master_seed, stream_index)`. The master seed is
//! expanded into a ChaCha8 key with SplitMix64 and the stream index selects the
//! ChaCha stream, so distinct indices never share keystream blocks.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives a child seed, e.g. to give each member of a parameter sweep its own
/// family of replication streams.
pub fn derive_seed(master_seed: u64, salt: u64) -> u64 {
    mix64(master_seed ^ mix64(salt.wrapping_add(0x632B_E59B_D9B4_E019)))
}

#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    stream_index: u64,
    inner: ChaCha8Rng,
    bits: u64,
    bits_left: u32,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut key = [0u8; 32];
        let mut state = master_seed;
        for chunk in key.chunks_exact_mut(8) {
            state = mix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(stream_index);
        Self { master_seed, stream_index, inner, bits: 0, bits_left: 0 }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` (Lemire's multiply-shift with rejection).
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// Standard exponential variate.
    #[inline]
    pub fn exponential(&mut self) -> f64 {
        -self.uniform().ln()
    }

    /// `k` fresh random bits (`1 <= k <= 32`) drawn from a buffered word.
    #[inline]
    pub fn bits(&mut self, k: u32) -> u32 {
        debug_assert!((1..=32).contains(&k));
        if self.bits_left < k {
            self.bits = self.next_u64();
            self.bits_left = 64;
        }
        let out = (self.bits & ((1u64 << k) - 1)) as u32;
        self.bits >>= k;
        self.bits_left -= k;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_ids_replay_bit_exactly() {
        let mut a = RngStream::new(42, 7);
        let mut b = RngStream::new(42, 7);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn distinct_indices_diverge() {
        let mut a = RngStream::new(42, 0);
        let mut b = RngStream::new(42, 1);
        let same = (0..64).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn uniform_stays_open() {
        let mut r = RngStream::new(1, 1);
        for _ in 0..100_000 {
            let u = r.uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn below_covers_range_evenly() {
        let mut r = RngStream::new(3, 0);
        let mut counts = [0u32; 5];
        for _ in 0..50_000 {
            counts[r.below(5) as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 400.0, "{counts:?}");
        }
    }

    #[test]
    fn bit_buffer_is_balanced() {
        let mut r = RngStream::new(9, 2);
        let ones: u32 = (0..64_000).map(|_| r.bits(1)).sum();
        assert!((ones as f64 - 32_000.0).abs() < 600.0);
    }
}
