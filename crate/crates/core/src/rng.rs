//! Deterministic seeding. Every random stream is a ChaCha8 generator keyed
//! by a 64-bit digest of the identifiers that name it.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive digest of a list of words.
pub fn hash_words(words: &[u64]) -> u64 {
    words.iter().fold(0x51_7cc1_b727_220a, |h, w| mix64(h ^ mix64(*w)))
}

/// FNV-1a of a string, for mixing identifiers into seeds.
pub fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Generator for `(key, seed)` positioned at stream `stream`.
pub fn stream_rng(key: &str, seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(hash_words(&[hash_str(key), seed]));
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream_rng("3.1", 7, 0).random();
        let b: u64 = stream_rng("3.1", 7, 0).random();
        let c: u64 = stream_rng("3.1", 7, 1).random();
        let d: u64 = stream_rng("3.2", 7, 0).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
