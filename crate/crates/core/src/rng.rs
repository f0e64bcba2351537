//! Counter-derived random streams.
//!
//! Every stochastic draw in the crate comes from a ChaCha8 stream whose key is
//! a hash of `(seed, purpose, indices...)`. A stream depends only on the
//! logical coordinates of the work (epoch, sample, layer, ...) and never on
//! which worker runs it or in what order, so results are independent of the
//! thread count.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tags keep streams for different consumers disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Init = 1,
    Shuffle = 2,
    Encode = 3,
    Neuron = 4,
    Noise = 5,
    Split = 6,
    Cycling = 7,
    Eval = 8,
    Subset = 9,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash `(seed, purpose, indices)` into a 64-bit stream key.
pub fn derive_key(seed: u64, purpose: Purpose, indices: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ splitmix64(purpose as u64));
    for &i in indices {
        h = splitmix64(h ^ splitmix64(i.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

pub fn stream(seed: u64, purpose: Purpose, indices: &[u64]) -> StreamRng {
    let key = derive_key(seed, purpose, indices);
    let mut bytes = [0u8; 32];
    let mut k = key;
    for chunk in bytes.chunks_exact_mut(8) {
        k = splitmix64(k);
        chunk.copy_from_slice(&k.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

/// Fixed-point acceptance threshold for a Bernoulli(p) draw against a `u32`.
///
/// `p >= 1` yields 2^32, which every `u32` is below, so certain events always
/// fire; `p <= 0` (and NaN) never fires.
#[inline]
pub fn bernoulli_threshold(p: f64) -> u64 {
    if p >= 1.0 {
        1u64 << 32
    } else if p > 0.0 {
        (p * 4_294_967_296.0) as u64
    } else {
        0
    }
}

#[inline]
pub fn bernoulli<R: RngCore + ?Sized>(rng: &mut R, p: f64) -> bool {
    (rng.next_u32() as u64) < bernoulli_threshold(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = stream(7, Purpose::Encode, &[1, 2]).next_u64();
        let b = stream(7, Purpose::Encode, &[1, 2]).next_u64();
        let c = stream(7, Purpose::Encode, &[2, 1]).next_u64();
        let d = stream(7, Purpose::Neuron, &[1, 2]).next_u64();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn bernoulli_extremes() {
        let mut rng = stream(1, Purpose::Cycling, &[]);
        for _ in 0..10_000 {
            assert!(bernoulli(&mut rng, 1.0));
            assert!(!bernoulli(&mut rng, 0.0));
        }
    }
}
