//! Deterministic seed derivation.
//!
//! Experiments need many independent streams (per repetition, per sample
//! size, per role) that are all reproducible from one master seed. Seeds are
//! derived by folding tag words into a splitmix64 chain, which is the usual
//! way to spawn well-separated seeds from a single word of entropy.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// One splitmix64 step: mixes the state and returns the next output word.
fn splitmix64(state: &mut u64) {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    *state = z ^ (z >> 31);
}

/// Derives a child seed from `master` and an ordered list of `tags`.
///
/// Different tag sequences give statistically independent streams; the same
/// sequence always gives the same seed.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut state = master;
    splitmix64(&mut state);
    for &t in tags {
        state ^= t;
        splitmix64(&mut state);
    }
    state
}

/// The crate's generator, seeded from a derived word.
pub fn rng_from(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_deterministic_and_tag_sensitive() {
        let a = derive_seed(42, &[1, 2]);
        assert_eq!(a, derive_seed(42, &[1, 2]));
        assert_ne!(a, derive_seed(42, &[2, 1]));
        assert_ne!(a, derive_seed(42, &[1]));
        assert_ne!(a, derive_seed(43, &[1, 2]));
    }

    #[test]
    fn zero_master_does_not_collapse() {
        // splitmix64 of 0 is a full-entropy word, so tag streams stay apart.
        let s0 = derive_seed(0, &[0]);
        let s1 = derive_seed(0, &[1]);
        assert_ne!(s0, s1);
        assert_ne!(s0, 0);
    }
}
