//! Seeded randomness and content fingerprints.
//!
//! Every random draw in the crate comes from a xoshiro256** generator seeded
//! through splitmix64. Sub-streams are derived by hashing a parent seed with
//! a list of labels, so a stream depends only on its coordinates and never on
//! how many draws another stream consumed.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;
use sha2::{Digest, Sha256};

pub type Rng = Xoshiro256StarStar;

pub fn rng_from_seed(seed: u64) -> Rng {
    Xoshiro256StarStar::seed_from_u64(seed)
}

/// Derives an independent seed from `seed` and a sequence of labels.
pub fn derive_seed(seed: u64, labels: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for l in labels {
        h.update((l.len() as u64).to_le_bytes());
        h.update(l.as_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Hex-encoded, truncated SHA-256 of `bytes` (128 bits).
pub fn fingerprint(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    hex::encode(&digest[..16])
}

/// `round(p * n)` with halves rounded up, clamped to `[0, n]`.
///
/// A 1e-9 slack absorbs binary representation error so that e.g.
/// `0.5 * 101` and `0.3 * 5` land on the intended half.
pub fn round_half_up(p: f64, n: usize) -> usize {
    let raw = (p * n as f64 + 0.5 + 1e-9).floor();
    if raw <= 0.0 {
        0
    } else {
        (raw as usize).min(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn rounding() {
        assert_eq!(round_half_up(0.3, 28_637), 8_591);
        assert_eq!(round_half_up(0.5, 28_637), 14_319);
        assert_eq!(round_half_up(0.5, 101), 51);
        assert_eq!(round_half_up(0.3, 10), 3);
        assert_eq!(round_half_up(0.3, 5), 2);
        assert_eq!(round_half_up(0.1, 101), 10);
        assert_eq!(round_half_up(0.0, 1000), 0);
        assert_eq!(round_half_up(1.0, 1000), 1000);
    }

    #[test]
    fn derived_seeds_are_stable_and_label_sensitive() {
        assert_eq!(derive_seed(7, &["a", "b"]), derive_seed(7, &["a", "b"]));
        assert_ne!(derive_seed(7, &["a", "b"]), derive_seed(7, &["ab"]));
        assert_ne!(derive_seed(7, &["a"]), derive_seed(8, &["a"]));
    }

    #[test]
    fn rng_is_reproducible() {
        let a: Vec<u64> = (0..4).map({ let mut r = rng_from_seed(1); move |_| r.random() }).collect();
        let b: Vec<u64> = (0..4).map({ let mut r = rng_from_seed(1); move |_| r.random() }).collect();
        assert_eq!(a, b);
    }
}
