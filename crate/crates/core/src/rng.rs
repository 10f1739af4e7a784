//! Deterministic RNG stream derivation.
//!
//! Every stochastic subsystem (waveform jitter, noise draws, weight init,
//! Monte-Carlo sampling) gets its own ChaCha stream derived from the master
//! seed plus a path of integer tags. Two properties matter:
//!
//! * the same `(master, path)` always yields the same stream, independently
//!   of what other streams were drawn in between, and
//! * distinct paths yield decorrelated streams (splitmix64 is a strong
//!   64-bit mixer, so even adjacent tags land far apart).
//!
//! This is what makes runs byte-reproducible while still letting e.g. each
//! sample own an independent noise realization.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One round of splitmix64: advances `state` and returns the mixed output.
#[inline]
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a tag path.
///
/// Each tag is absorbed by xoring it into the running state and applying one
/// splitmix64 round, so `derive_seed(m, &[a, b])` differs from
/// `derive_seed(m, &[b, a])` and from any prefix.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut state = master;
    let mut out = splitmix64(&mut state);
    for &tag in path {
        state ^= tag;
        out = splitmix64(&mut state);
    }
    out
}

/// A ChaCha8 stream for the given derivation path.
pub fn stream(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derivation_is_stable_and_path_sensitive() {
        let a = derive_seed(42, &[1, 2, 3]);
        let b = derive_seed(42, &[1, 2, 3]);
        assert_eq!(a, b);
        assert_ne!(a, derive_seed(42, &[1, 2]));
        assert_ne!(a, derive_seed(42, &[3, 2, 1]));
        assert_ne!(a, derive_seed(43, &[1, 2, 3]));
    }

    #[test]
    fn streams_are_independent_of_draw_order() {
        let mut r1 = stream(7, &[0, 5]);
        let first: f64 = r1.gen();
        // Draw from an unrelated stream in between; the derived stream is
        // unaffected.
        let _ = stream(7, &[0, 6]).gen::<f64>();
        let mut r2 = stream(7, &[0, 5]);
        assert_eq!(first, r2.gen::<f64>());
    }

    #[test]
    fn adjacent_tags_decorrelate() {
        // Cheap sanity check: low bit of derived seeds over adjacent tags
        // should look balanced, not stuck.
        let ones: u32 = (0..64u64)
            .map(|i| (derive_seed(0, &[i]) & 1) as u32)
            .sum();
        assert!((16..=48).contains(&ones), "low bits look degenerate: {ones}");
    }
}
