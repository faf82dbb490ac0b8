//! Seed-stream derivation.
//!
//! Every stochastic operation in the crate draws from a ChaCha8 stream derived
//! from an explicit `u64` seed plus a list of tags (trace index, EM iteration,
//! origin id, ...). ChaCha8 is platform-stable, so identical seeds reproduce
//! byte-identical results everywhere.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent ChaCha8 stream from `seed` and a tag path.
///
/// Distinct tag paths yield statistically independent streams; the same
/// (seed, tags) pair always yields the same stream.
pub fn stream(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut state = seed ^ 0x6a09_e667_f3bc_c908;
    let _ = splitmix64(&mut state);
    for &t in tags {
        state ^= t.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let _ = splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_tags_same_stream() {
        let mut a = stream(7, &[1, 2]);
        let mut b = stream(7, &[1, 2]);
        for _ in 0..16 {
            assert_eq!(a.gen::<u64>(), b.gen::<u64>());
        }
    }

    #[test]
    fn different_tags_diverge() {
        let mut a = stream(7, &[1, 2]);
        let mut b = stream(7, &[2, 1]);
        let same = (0..16).filter(|_| a.gen::<u64>() == b.gen::<u64>()).count();
        assert!(same < 2);
    }

    #[test]
    fn stable_reference_draw() {
        // Frozen so cross-platform drift would be caught immediately.
        let mut r = stream(42, &[]);
        assert_eq!(r.gen::<u64>(), 0xC077_E009_2407_41BB);
    }
}
