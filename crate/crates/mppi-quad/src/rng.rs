//! Deterministic per-rollout random streams.
//!
//! Each rollout draws from its own ChaCha stream keyed by
//! (seed, iteration, rollout index), so sampling is reproducible and
//! independent of evaluation order or worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DOMAIN_TAG: &[u8; 8] = b"mppiroll";

/// Stream for one rollout of one controller iteration.
pub fn rollout_stream(seed: u64, iteration: u64, rollout: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&iteration.to_le_bytes());
    key[16..24].copy_from_slice(&rollout.to_le_bytes());
    key[24..32].copy_from_slice(DOMAIN_TAG);
    ChaCha8Rng::from_seed(key)
}
