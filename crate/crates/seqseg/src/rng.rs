//! Deterministic RNG stream derivation.
//!
//! Every stochastic component draws from a ChaCha stream whose key is a pure
//! function of the user seed and the component's coordinates (node interval,
//! chain index, repeat index). Results are therefore reproducible and
//! independent of scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer. Decorrelates structured inputs such as consecutive
/// integers or interval endpoints.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a seed and a sequence of coordinates into one 64-bit stream key.
pub(crate) fn mix(seed: u64, parts: &[u64]) -> u64 {
    let mut h = splitmix64(seed);
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    h
}

/// RNG for one MCMC chain: the seed selects the key, the chain id selects
/// the stream, so chains never share draws.
pub(crate) fn chain_rng(seed: u64, chain_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain_id);
    rng
}
