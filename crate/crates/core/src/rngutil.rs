//! Deterministic derivation of per-task RNG streams from a master seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; good avalanche, cheap, stable across platforms.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent RNG stream for a named task.
///
/// The same `(master_seed, context, index)` triple always yields the same
/// stream, and distinct triples yield streams that are independent for all
/// practical purposes. `context` names the call site (e.g. `"bootstrap"`)
/// so that adding a new randomised step never perturbs existing ones.
pub fn derive_rng(master_seed: u64, context: &str, index: u64) -> ChaCha8Rng {
    let mut h = mix(master_seed);
    for &b in context.as_bytes() {
        h = mix(h ^ u64::from(b));
    }
    h = mix(h ^ index);
    let mut seed = [0u8; 32];
    for (i, chunk) in seed.chunks_mut(8).enumerate() {
        let word = mix(h ^ (i as u64));
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
