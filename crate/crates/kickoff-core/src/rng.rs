//! Deterministic RNG streams derived from a single 64-bit run seed.
//!
//! Every source of randomness in a run is a `ChaCha8Rng` keyed by
//! `(root_seed, domain, index)` through a splitmix64 expansion, so adding or
//! reordering consumers never perturbs unrelated streams and parallel
//! workers can be handed independent, reproducible generators.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Randomness domains. The discriminant is part of the key derivation, so
/// variants must keep their values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Environment resets within a run.
    Reset = 1,
    /// Weight initialization, indexed by (learner, net).
    Init = 2,
    /// Exploration noise / warmup actions, indexed by learner.
    Action = 3,
    /// Replay-buffer mini-batch sampling, indexed by learner.
    Sample = 4,
    /// Target policy smoothing noise, indexed by learner.
    TargetNoise = 5,
    /// Arena match scheduling and evaluation episodes.
    Match = 6,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive an independent generator for `(root, domain, index)`.
pub fn stream(root: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut state = root ^ (domain as u64).wrapping_mul(0xa076_1d64_78bd_642f) ^ index.rotate_left(17);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
